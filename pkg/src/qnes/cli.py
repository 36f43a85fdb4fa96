"""``qnes`` command line.

    qnes solve     --n 16 --trials 10 --batch 1024
    qnes baseline  --solver bm+rounding --n 50
    qnes sweep     --n 50 --batches 256,1024,4096 --alphas 1
    qnes ablate    --n 16 --optimizers sgd,adamax --archs rRBM-1,cRBM-1 --natural-grad on,off
    qnes oracle    --n 16

Exit codes: 0 success, 2 invalid configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .bench import (
    BaselineSpec,
    ExperimentConfig,
    InstanceSpec,
    ModelSpec,
    NesSpec,
    SamplerSpec,
    ablation_optimizers,
    run_baseline,
    run_nes,
    sweep_batch_size,
)
from .errors import ConfigError, InvalidInstanceError, QnesError
from .natgrad import OptimizerConfig

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

_ARCH = {"rrbm": ("RBM", "real"), "crbm": ("RBM", "complex"), "fc": ("FC", "complex")}
_METRIC = {"mean": "batch_mean_f", "best": "best_sampled_cut", "mode": "most_probable_cut"}


def _load_config_file(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def _csv_list(conv):
    def parse(s):
        try:
            return [conv(v) for v in s.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    return parse


def _onoff(s):
    return {"on": True, "off": False}[s]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML or JSON document mirroring ExperimentConfig")
    p.add_argument("--instance", help="instance file (JSON or 'n m' edge list)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--instance-seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="base seed for trial seeds")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _add_nes(p: argparse.ArgumentParser):
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--arch", choices=tuple(_ARCH), default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--optimizer", choices=("sgd", "momentum", "rmsprop", "adadelta", "adamax"), default=None)
    p.add_argument("--natural-grad", choices=("on", "off"), default=None)
    p.add_argument("--metric", choices=tuple(_METRIC), default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qnes", description="Natural evolution strategies for Max-Cut")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run NES trials on one instance")
    _add_common(p)
    _add_nes(p)

    p = sub.add_parser("baseline", help="run a reference solver")
    _add_common(p)
    p.add_argument("--solver", choices=("random", "bm+rounding"), default="bm+rounding")
    p.add_argument("--repeats", type=int, default=None, help="hyperplanes per trial")
    p.add_argument("--draws", type=int, default=None, help="random assignments per trial")

    p = sub.add_parser("sweep", help="batch size x hidden density grid")
    _add_common(p)
    _add_nes(p)
    p.add_argument("--batches", type=_csv_list(int), default=[256, 1024, 4096])
    p.add_argument("--alphas", type=_csv_list(float), default=[1.0])

    p = sub.add_parser("ablate", help="optimizer x architecture grid")
    _add_common(p)
    _add_nes(p)
    p.add_argument("--optimizers", type=_csv_list(str), default=["adadelta", "adamax", "momentum", "rmsprop", "sgd"])
    p.add_argument("--archs", type=_csv_list(str), default=["rRBM-1", "cRBM-1", "cRBM-3", "FC"])
    p.add_argument("--ng-flags", type=_csv_list(_onoff), default=[True, False], help="e.g. on,off")

    p = sub.add_parser("oracle", help="reference values for an instance")
    _add_common(p)
    return ap


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_dict(_load_config_file(args.config)) if args.config else ExperimentConfig()
    inst = cfg.instance
    inst = replace(
        inst,
        n=args.n if args.n is not None else inst.n,
        density=args.density if args.density is not None else inst.density,
        seed=args.instance_seed if args.instance_seed is not None else inst.seed,
        path=args.instance or inst.path,
    )
    cfg = replace(cfg, instance=inst)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed, trial_seeds=None)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)

    if hasattr(args, "batch"):
        nes = cfg.nes
        model, sampler, opt = nes.model, nes.sampler, nes.optimizer
        if args.arch:
            a, f = _ARCH[args.arch]
            model = replace(model, architecture=a, field=f)
        if args.alpha is not None:
            model = replace(model, alpha=args.alpha)
        sampler = replace(
            sampler,
            batch_size=args.batch if args.batch is not None else sampler.batch_size,
            n_chains=args.chains if args.chains is not None else sampler.n_chains,
            burn_in_sweeps=args.burn_in if args.burn_in is not None else sampler.burn_in_sweeps,
        )
        okw = {}
        if args.optimizer:
            okw.update(kind=args.optimizer, learning_rate=None, rho=None)
        if args.lr is not None:
            okw["learning_rate"] = args.lr
        if args.lam is not None:
            okw["shift"] = args.lam
        if args.natural_grad is not None:
            okw["natural_gradient"] = _onoff(args.natural_grad)
        if okw:
            opt = replace(opt, **okw)
        nes = NesSpec(model=model, sampler=sampler, optimizer=opt,
                      iterations=args.iters if args.iters is not None else nes.iterations)
        cfg = replace(cfg, nes=nes, solver="nes")
        if args.metric:
            cfg = replace(cfg, report_metric=_METRIC[args.metric])
    if getattr(args, "solver", None):
        bl = cfg.baseline
        bl = replace(
            bl,
            name=args.solver,
            repeats=args.repeats if args.repeats is not None else bl.repeats,
            draws=args.draws if args.draws is not None else bl.draws,
        )
        cfg = replace(cfg, solver=args.solver, baseline=bl)
    return cfg.validate()


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _oracle(cfg: ExperimentConfig) -> dict:
    from .baselines import ubd_estimate
    from .problem import BRUTE_FORCE_MAX_N, brute_force_optimum, content_hash, spectral_upper_bound

    inst = cfg.instance.build()
    out = {"n": inst.n, "n_edges": inst.n_edges, "instance_hash": content_hash(inst)}
    out["spectral_upper_bound"] = spectral_upper_bound(inst)
    u = ubd_estimate(inst)
    out.update(ubd_estimate=u.estimate, bm_value=u.bm_value, rank=u.rank)
    if inst.n <= BRUTE_FORCE_MAX_N:
        best, count = brute_force_optimum(inst)
        out.update(max_cut=best, optimizer_count=count)
    return out


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"qnes: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "oracle":
            res = _oracle(cfg)
            text = json.dumps(res, indent=2) if args.format == "json" else (
                ",".join(res) + "\n" + ",".join(str(v) for v in res.values())
            )
            _emit(text, args.out)
            return EXIT_OK
        if args.command == "solve":
            rep = run_nes(cfg)
            failed = rep.n_failed
        elif args.command == "baseline":
            rep = run_baseline(cfg)
            failed = rep.n_failed
        elif args.command == "sweep":
            rep = sweep_batch_size(cfg, args.batches, args.alphas)
            failed = sum(r.n_failed for r in rep.cells.values())
        else:
            rep = ablation_optimizers(cfg, args.optimizers, args.archs, args.ng_flags)
            failed = sum(r.n_failed for r in rep.cells.values())
    except (ConfigError, InvalidInstanceError, OSError) as exc:
        print(f"qnes: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QnesError as exc:
        print(f"qnes: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    text = rep.to_csv() if args.format == "csv" else json.dumps(rep.to_dict(), indent=1)
    _emit(text, args.out)
    if failed:
        print(f"qnes: {failed} trial(s) failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
