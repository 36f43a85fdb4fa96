"""Seeded experiment runner.

Every report is a pure function of its :class:`ExperimentConfig` apart from
wall-clock fields: trial ``i`` draws all randomness from streams derived from
``(trial seed, purpose, iteration)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .ansatz import init_parameters
from .baselines import burer_monteiro, default_rank, hyperplane_round, random_cut, ubd_estimate
from .errors import ConfigError, QnesError
from .natgrad import OptimizerConfig, default_learning_rate, estimate, init_optimizer_state, optimizer_step
from .problem import (
    BRUTE_FORCE_MAX_N,
    MaxCutInstance,
    brute_force_optimum,
    content_hash,
    generate_instance,
    load_instance,
)
from .sampler import SamplerConfig, config_index, metropolis_sample

__all__ = [
    "InstanceSpec",
    "ModelSpec",
    "SamplerSpec",
    "NesSpec",
    "BaselineSpec",
    "ExperimentConfig",
    "RunReport",
    "derive_seed",
    "run_nes",
    "run_baseline",
    "run_experiment",
    "sweep_batch_size",
    "ablation_optimizers",
    "parse_architecture",
    "loglog_r2",
    "REPORT_METRICS",
    "BASELINES",
]

REPORT_METRICS = ("batch_mean_f", "best_sampled_cut", "most_probable_cut")
BASELINES = ("random", "bm+rounding")
_U64 = 2**64

# purposes for derived seeds
_INIT, _SAMPLE, _FINAL = 0, 1, 2


def derive_seed(*keys: int) -> int:
    """64-bit seed derived deterministically from non-negative integer keys."""
    ss = np.random.SeedSequence([int(k) % _U64 for k in keys])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class InstanceSpec:
    n: int = 50
    density: float = 0.5
    seed: int = 0
    path: str | None = None

    def build(self) -> MaxCutInstance:
        if self.path:
            return load_instance(self.path)
        return generate_instance(self.n, self.density, self.seed)


@dataclass
class ModelSpec:
    architecture: str = "RBM"
    field: str = "complex"
    alpha: float = 1.0
    init_std: float = 0.01

    @property
    def label(self) -> str:
        a = f"{self.alpha:g}"
        if self.architecture.upper() == "FC":
            return "FC" if self.alpha == 1 else f"FC-{a}"
        return f"{'c' if self.field == 'complex' else 'r'}RBM-{a}"


@dataclass
class SamplerSpec:
    batch_size: int = 4096
    n_chains: int = 32
    burn_in_sweeps: int = 100


@dataclass
class NesSpec:
    model: ModelSpec = field(default_factory=ModelSpec)
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    iterations: int = 90


@dataclass
class BaselineSpec:
    name: str = "bm+rounding"
    draws: int = 1  # random assignments per trial ("random")
    rank: int | None = None
    repeats: int = 100  # hyperplanes per trial ("bm+rounding")
    max_iters: int = 10_000


@dataclass
class ExperimentConfig:
    instance: InstanceSpec = field(default_factory=InstanceSpec)
    solver: str = "nes"
    nes: NesSpec = field(default_factory=NesSpec)
    baseline: BaselineSpec = field(default_factory=BaselineSpec)
    trials: int = 10
    base_seed: int = 0
    trial_seeds: list[int] | None = None
    report_metric: str = "batch_mean_f"
    workers: int = 1
    reference: bool = True  # compute UBD estimate and, for n <= 26, the exact optimum

    def validate(self) -> "ExperimentConfig":
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.trial_seeds is not None and len(self.trial_seeds) != self.trials:
            raise ConfigError("trial_seeds must list one seed per trial")
        if self.report_metric not in REPORT_METRICS:
            raise ConfigError(f"report_metric must be one of {REPORT_METRICS}")
        if self.solver != "nes" and self.solver not in BASELINES:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.solver == "nes":
            s = self.nes.sampler
            SamplerConfig(s.batch_size, s.n_chains, s.burn_in_sweeps)
            if self.nes.iterations < 0:
                raise ConfigError("iterations must be >= 0")
            if self.nes.model.field not in ("real", "complex"):
                raise ConfigError(f"unknown field {self.nes.model.field!r}")
            if self.nes.model.architecture.upper() not in ("RBM", "FC"):
                raise ConfigError(f"unknown architecture {self.nes.model.architecture!r}")
            if self.nes.model.alpha <= 0:
                raise ConfigError("alpha must be positive")
        if self.instance.path is None and self.instance.n < 2:
            raise ConfigError("instance needs n >= 2")
        return self

    def seed_for(self, trial: int) -> int:
        if self.trial_seeds is not None:
            return int(self.trial_seeds[trial])
        return derive_seed(self.base_seed, trial)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return _build(cls, data).validate()
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc


_NESTED = {
    ("ExperimentConfig", "instance"): InstanceSpec,
    ("ExperimentConfig", "nes"): NesSpec,
    ("ExperimentConfig", "baseline"): BaselineSpec,
    ("NesSpec", "model"): ModelSpec,
    ("NesSpec", "sampler"): SamplerSpec,
    ("NesSpec", "optimizer"): OptimizerConfig,
}


def _build(cls, data):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        sub = _NESTED.get((cls.__name__, k))
        kwargs[k] = _build(sub, v) if sub is not None and isinstance(v, dict) else v
    return cls(**kwargs)


# -- reports -----------------------------------------------------------------


@dataclass
class RunReport:
    solver: str
    config: dict
    instance_hash: str
    version: str
    n: int
    n_edges: int
    trials: list[dict]
    mean: float
    std: float
    n_failed: int
    ubd: dict | None = None
    optimum: int | None = None
    mean_ratio_ubd: float | None = None
    std_ratio_ubd: float | None = None
    mean_ratio_opt: float | None = None

    @property
    def ok_trials(self) -> list[dict]:
        return [t for t in self.trials if t["status"] == "ok"]

    @property
    def values(self) -> np.ndarray:
        return np.array([t["metric"] for t in self.ok_trials], dtype=float)

    @property
    def mean_wall_time(self) -> float:
        return float(np.mean([t["wall_time_s"] for t in self.ok_trials])) if self.ok_trials else math.nan

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        cols = ["trial", "seed", "status", "metric", "best_cut", "ratio_ubd", "ratio_opt", "wall_time_s"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for t in self.trials:
            w.writerow(t)
        return buf.getvalue()


def _stats(vals) -> tuple[float, float]:
    if len(vals) == 0:
        return math.nan, math.nan
    a = np.asarray(vals, dtype=float)
    return float(a.mean()), float(a.std())


def _reference(instance: MaxCutInstance, config: ExperimentConfig):
    if not config.reference:
        return None, None
    u = ubd_estimate(instance)
    opt = brute_force_optimum(instance)[0] if instance.n <= BRUTE_FORCE_MAX_N else None
    return asdict(u), opt


def _assemble(solver, config, instance, trials, ubd, opt) -> RunReport:
    for t in trials:
        if t["status"] == "ok":
            if ubd is not None and ubd["estimate"] > 0:
                t["ratio_ubd"] = t["metric"] / ubd["estimate"]
            if opt:
                t["ratio_opt"] = t["metric"] / opt
    ok = [t for t in trials if t["status"] == "ok"]
    mean, std = _stats([t["metric"] for t in ok])
    rep = RunReport(
        solver=solver,
        config=config.to_dict(),
        instance_hash=content_hash(instance),
        version=__version__,
        n=instance.n,
        n_edges=instance.n_edges,
        trials=trials,
        mean=mean,
        std=std,
        n_failed=len(trials) - len(ok),
        ubd=ubd,
        optimum=opt,
    )
    if ok and "ratio_ubd" in ok[0]:
        rep.mean_ratio_ubd, rep.std_ratio_ubd = _stats([t["ratio_ubd"] for t in ok])
    if ok and "ratio_opt" in ok[0]:
        rep.mean_ratio_opt = _stats([t["ratio_opt"] for t in ok])[0]
    return rep


def _map_trials(fn, config, instance):
    args = [(config, instance, i) for i in range(config.trials)]
    if config.workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_call, [fn] * len(args), args))
    return [fn(*a) for a in args]


def _call(fn, a):
    return fn(*a)


# -- NES ---------------------------------------------------------------------


def _nes_optimise(spec: NesSpec, instance: MaxCutInstance, seed: int, report_metric: str) -> dict:
    model = init_parameters(
        spec.model.architecture,
        spec.model.field,
        instance.n,
        spec.model.alpha,
        spec.model.init_std,
        seed=derive_seed(seed, _INIT),
    )
    opt = spec.optimizer
    state = init_optimizer_state(opt.kind, model.d, model.dtype)
    s = spec.sampler
    best = -1
    trace = []

    def sample(seed_):
        return metropolis_sample(model, SamplerConfig(s.batch_size, s.n_chains, s.burn_in_sweeps, seed=seed_))

    for it in range(spec.iterations):
        batch = sample(derive_seed(seed, _SAMPLE, it))
        est = estimate(model, batch, instance)
        best = max(best, int(-est.energies.min()))
        model, state = optimizer_step(state, model, est, opt)
        trace.append(
            {
                "iter": it,
                "energy_mean": est.energy_mean,
                "energy_var": est.energy_var,
                "acceptance_rate": batch.acceptance_rate,
                "grad_norm": float(np.linalg.norm(est.grad)),
                "solve_residual": None if state.last_solve is None else state.last_solve.residual,
            }
        )
    final = sample(derive_seed(seed, _FINAL))
    est = estimate(model, final, instance)
    cuts = -est.energies
    best = max(best, int(cuts.max()))
    idx = config_index(final.configs)
    uniq, counts = np.unique(idx, return_counts=True)
    mode_rows = np.flatnonzero(idx == uniq[np.argmax(counts)])
    most_probable = int(cuts[mode_rows[0]])
    batch_mean = float(cuts.mean())
    metric = {
        "batch_mean_f": batch_mean,
        "best_sampled_cut": float(best),
        "most_probable_cut": float(most_probable),
    }[report_metric]
    return dict(
        metric=metric,
        best_cut=best,
        final_batch_mean_cut=batch_mean,
        most_probable_cut=most_probable,
        final_acceptance_rate=final.acceptance_rate,
        trace=trace,
    )


def _nes_trial(config: ExperimentConfig, instance: MaxCutInstance, trial: int) -> dict:
    seed = config.seed_for(trial)
    rec = {"trial": trial, "seed": seed, "status": "ok"}
    t0 = time.perf_counter()
    try:
        # Diverging runs overflow on the way to a NumericError; that is reported, not warned about.
        with np.errstate(over="ignore", invalid="ignore"):
            rec.update(_nes_optimise(config.nes, instance, seed, config.report_metric))
    except (QnesError, FloatingPointError, np.linalg.LinAlgError) as exc:
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    rec["wall_time_s"] = time.perf_counter() - t0
    return rec


def run_nes(config: ExperimentConfig, instance: MaxCutInstance | None = None, reference=None) -> RunReport:
    """Run ``config.trials`` independent NES optimisations.

    ``instance`` and ``reference`` (a ``(ubd dict, optimum)`` pair) may be
    passed in to share them across grid cells.
    """
    config.validate()
    if config.solver != "nes":
        raise ConfigError("run_nes needs solver='nes'")
    instance = instance or config.instance.build()
    ubd, opt = reference if reference is not None else _reference(instance, config)
    trials = _map_trials(_nes_trial, config, instance)
    return _assemble("nes", config, instance, trials, ubd, opt)


# -- baselines ---------------------------------------------------------------


def _baseline_trial(config: ExperimentConfig, instance: MaxCutInstance, trial: int) -> dict:
    spec = config.baseline
    seed = config.seed_for(trial)
    rec = {"trial": trial, "seed": seed, "status": "ok", "solver": spec.name}
    t0 = time.perf_counter()
    try:
        if spec.name == "random":
            cut, _ = random_cut(instance, seed=seed, trials=spec.draws)
        else:
            factor = burer_monteiro(
                instance, p=spec.rank or default_rank(instance.n), seed=derive_seed(seed, 0),
                max_iters=spec.max_iters,
            )
            cut, _ = hyperplane_round(factor, instance, seed=derive_seed(seed, 1), repeats=spec.repeats)
            rec.update(sdp_value=factor.sdp_value, rank=factor.p, converged=factor.converged)
        rec.update(cut=cut, metric=float(cut), best_cut=cut)
    except QnesError as exc:
        rec.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    rec["wall_time_s"] = time.perf_counter() - t0
    return rec


def run_baseline(config: ExperimentConfig, instance: MaxCutInstance | None = None, reference=None) -> RunReport:
    config.validate()
    name = config.solver if config.solver in BASELINES else config.baseline.name
    if name not in BASELINES:
        raise ConfigError(f"unknown baseline {name!r}")
    config = replace(config, solver=name, baseline=replace(config.baseline, name=name))
    instance = instance or config.instance.build()
    ubd, opt = reference if reference is not None else _reference(instance, config)
    trials = _map_trials(_baseline_trial, config, instance)
    label = "BM+rounding" if name == "bm+rounding" else "random"
    return _assemble(label, config, instance, trials, ubd, opt)


def run_experiment(config: ExperimentConfig) -> RunReport:
    return run_nes(config) if config.solver == "nes" else run_baseline(config)


# -- grids -------------------------------------------------------------------


def loglog_r2(x, y) -> float:
    """Coefficient of determination of a straight-line fit of log y on log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if len(lx) < 2:
        return 1.0
    slope, icept = np.polyfit(lx, ly, 1)
    ss_res = float(np.sum((ly - (slope * lx + icept)) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


@dataclass
class SweepResult:
    batch_sizes: list[int]
    alphas: list[float]
    cells: dict  # (alpha, batch) -> RunReport

    def rows(self) -> list[dict]:
        out = []
        for a in self.alphas:
            for bsz in self.batch_sizes:
                r = self.cells[(a, bsz)]
                out.append(
                    {
                        "alpha": a,
                        "batch_size": bsz,
                        "mean_cut": r.mean,
                        "std_cut": r.std,
                        "mean_ratio": r.mean_ratio_ubd,
                        "std_ratio": r.std_ratio_ubd,
                        "mean_wall_time_s": r.mean_wall_time,
                        "n_failed": r.n_failed,
                    }
                )
        return out

    def to_csv(self) -> str:
        return _rows_csv(self.rows())

    def to_dict(self) -> dict:
        return {"rows": self.rows(), "cells": [c.to_dict() for c in self.cells.values()]}


def _rows_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def sweep_batch_size(base: ExperimentConfig, batch_sizes, alphas) -> SweepResult:
    """Cross product of batch sizes and hidden densities on one instance.

    All cells share the instance, the reference values and the trial seeds.
    """
    batch_sizes, alphas = list(batch_sizes), list(alphas)
    if not batch_sizes or not alphas:
        raise ConfigError("batch_sizes and alphas must be non-empty")
    base.validate()
    instance = base.instance.build()
    ref = _reference(instance, base)
    cells = {}
    for a in alphas:
        for bsz in batch_sizes:
            nes = replace(
                base.nes,
                model=replace(base.nes.model, alpha=a),
                sampler=replace(base.nes.sampler, batch_size=bsz),
            )
            cells[(a, bsz)] = run_nes(replace(base, nes=nes), instance, ref)
    return SweepResult(batch_sizes, alphas, cells)


_ARCH_RE = re.compile(r"^(?:(?P<f>[rc])RBM|(?P<fc>FC))(?:-(?P<a>[0-9.]+))?$", re.IGNORECASE)


def parse_architecture(label: str, fc_field: str = "complex") -> ModelSpec:
    """``"cRBM-3"`` -> complex RBM with alpha 3; ``"FC"`` -> FC with alpha 1."""
    m = _ARCH_RE.match(label.strip())
    if not m:
        raise ConfigError(f"unrecognised architecture label {label!r}")
    alpha = float(m.group("a")) if m.group("a") else 1.0
    if m.group("fc"):
        return ModelSpec(architecture="FC", field=fc_field, alpha=alpha)
    return ModelSpec(architecture="RBM", field="complex" if m.group("f").lower() == "c" else "real", alpha=alpha)


@dataclass
class AblationResult:
    kinds: list[str]
    architectures: list[str]
    natural_gradient: list[bool]
    cells: dict  # (arch label, kind, ng) -> RunReport

    def rows(self) -> list[dict]:
        """One row per (natural-gradient flag, architecture); columns per optimizer."""
        out = []
        for ng in self.natural_gradient:
            for arch in self.architectures:
                row = {"natural_gradient": ng, "architecture": arch}
                for k in self.kinds:
                    r = self.cells[(arch, k, ng)]
                    row[k] = f"{r.mean:.2f} ± {r.std:.2f}"
                out.append(row)
        return out

    def to_csv(self) -> str:
        return _rows_csv(self.rows())

    def to_dict(self) -> dict:
        return {
            "rows": self.rows(),
            "cells": [
                {"architecture": a, "optimizer": k, "natural_gradient": ng, "report": r.to_dict()}
                for (a, k, ng), r in self.cells.items()
            ],
        }


def ablation_optimizers(base: ExperimentConfig, kinds, architectures, natural_gradient=(True, False)) -> AblationResult:
    """Optimizer x architecture x natural-gradient grid with shared seeds.

    Each optimizer runs at its default learning rate (see
    :func:`qnes.natgrad.default_learning_rate`); the metric shift comes from
    the base config.
    """
    kinds = [k.lower() for k in kinds]
    architectures = list(architectures)
    natural_gradient = [bool(f) for f in natural_gradient]
    if not kinds or not architectures or not natural_gradient:
        raise ConfigError("ablation lists must be non-empty")
    specs = {a: parse_architecture(a, base.nes.model.field) for a in architectures}
    base.validate()
    instance = base.instance.build()
    ref = _reference(instance, base)
    cells = {}
    for ng in natural_gradient:
        for arch in architectures:
            for k in kinds:
                opt = replace(
                    base.nes.optimizer, kind=k, learning_rate=default_learning_rate(k), natural_gradient=ng,
                    rho=None,
                )
                mspec = replace(specs[arch], init_std=base.nes.model.init_std)
                cfg = replace(base, nes=replace(base.nes, model=mspec, optimizer=opt))
                cells[(arch, k, ng)] = run_nes(cfg, instance, ref)
    return AblationResult(kinds, architectures, natural_gradient, cells)
