import csv
import io
import json

import numpy as np
import pytest

from qnes import __version__
from qnes.bench import (
    BaselineSpec,
    ExperimentConfig,
    InstanceSpec,
    ModelSpec,
    NesSpec,
    SamplerSpec,
    ablation_optimizers,
    derive_seed,
    loglog_r2,
    parse_architecture,
    run_baseline,
    run_experiment,
    run_nes,
    sweep_batch_size,
)
from qnes.errors import ConfigError, SingularMetricError
from qnes.natgrad import OptimizerConfig
from qnes.problem import MaxCutInstance, content_hash, generate_instance, save_instance


def small_config(**kw):
    base = dict(
        instance=InstanceSpec(n=8, density=0.5, seed=1),
        nes=NesSpec(sampler=SamplerSpec(batch_size=64, n_chains=4, burn_in_sweeps=10), iterations=3),
        trials=3,
        base_seed=5,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def strip_times(report_dict):
    for t in report_dict["trials"]:
        t.pop("wall_time_s")
    return report_dict


class TestConfig:
    def test_defaults_match_protocol(self):
        cfg = ExperimentConfig()
        assert cfg.nes.optimizer.learning_rate == 5e-2
        assert cfg.nes.optimizer.shift == 0.1
        assert cfg.nes.iterations == 90
        assert cfg.nes.sampler.batch_size == 4096
        assert (cfg.nes.model.architecture, cfg.nes.model.field, cfg.nes.model.alpha) == ("RBM", "complex", 1.0)
        assert cfg.nes.model.init_std == 0.01
        assert cfg.report_metric == "batch_mean_f"

    def test_round_trip(self):
        cfg = small_config(trial_seeds=[3, 4, 5], report_metric="best_sampled_cut")
        back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back.to_dict() == cfg.to_dict()
        assert isinstance(back.nes.optimizer, OptimizerConfig)

    @pytest.mark.parametrize(
        "patch",
        [
            {"trials": 0},
            {"report_metric": "median"},
            {"solver": "annealing"},
            {"trial_seeds": [1]},
        ],
    )
    def test_invalid(self, patch):
        with pytest.raises(ConfigError):
            small_config(**patch).validate()

    def test_invalid_nested(self):
        data = small_config().to_dict()
        data["nes"]["sampler"]["batch_size"] = 63
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)
        data = small_config().to_dict()
        data["nes"]["optimizer"]["kind"] = "newton"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"trails": 3})

    def test_trial_seeds(self):
        cfg = small_config(trial_seeds=[11, 12, 13])
        assert [cfg.seed_for(i) for i in range(3)] == [11, 12, 13]
        auto = small_config()
        assert auto.seed_for(0) == derive_seed(5, 0) != auto.seed_for(1)


class TestRunNes:
    def test_report_shape(self):
        rep = run_nes(small_config())
        assert rep.solver == "nes" and rep.n_failed == 0 and len(rep.trials) == 3
        assert rep.version == __version__
        assert rep.instance_hash == content_hash(generate_instance(8, 0.5, 1))
        t = rep.trials[0]
        assert len(t["trace"]) == 3
        assert set(t["trace"][0]) == {"iter", "energy_mean", "energy_var", "acceptance_rate", "grad_norm", "solve_residual"}
        assert t["best_cut"] <= rep.optimum
        assert rep.ubd["estimate"] >= rep.optimum

    def test_aggregates_recompute(self):
        rep = run_nes(small_config())
        vals = [t["metric"] for t in rep.trials]
        assert abs(rep.mean - np.mean(vals)) <= 1e-12
        assert abs(rep.std - np.std(vals)) <= 1e-12
        ratios = [t["ratio_ubd"] for t in rep.trials]
        assert abs(rep.mean_ratio_ubd - np.mean(ratios)) <= 1e-12
        assert abs(rep.mean_ratio_opt - np.mean([t["ratio_opt"] for t in rep.trials])) <= 1e-12

    def test_determinism(self):
        a = strip_times(run_nes(small_config()).to_dict())
        b = strip_times(run_nes(small_config()).to_dict())
        assert a == b

    def test_parallel_matches_serial(self):
        a = strip_times(run_nes(small_config()).to_dict())
        b = strip_times(run_nes(small_config(workers=2)).to_dict())
        b["config"]["workers"] = 1
        assert a == b

    def test_zero_iterations_is_uniform(self):
        inst = generate_instance(12, 0.5, seed=3)
        cfg = small_config(
            instance=InstanceSpec(n=12, density=0.5, seed=3),
            nes=NesSpec(sampler=SamplerSpec(batch_size=4096, n_chains=32, burn_in_sweeps=10), iterations=0),
            trials=1,
        )
        rep = run_nes(cfg)
        # Zero-initialised RBM is uniform; each edge is cut independently with probability 1/2.
        expected, sigma = inst.n_edges / 2, np.sqrt(inst.n_edges / 4 / 4096)
        assert rep.trials[0]["trace"] == []
        assert abs(rep.mean - expected) <= 5 * sigma

    @pytest.mark.parametrize("metric", ["batch_mean_f", "best_sampled_cut", "most_probable_cut"])
    def test_metrics(self, metric):
        rep = run_nes(small_config(report_metric=metric, trials=1))
        t = rep.trials[0]
        expected = {
            "batch_mean_f": t["final_batch_mean_cut"],
            "best_sampled_cut": t["best_cut"],
            "most_probable_cut": t["most_probable_cut"],
        }[metric]
        assert t["metric"] == expected

    def test_failed_trial_recorded(self, monkeypatch):
        import qnes.bench

        def boom(*args, **kw):
            raise SingularMetricError("forced", {})

        monkeypatch.setattr(qnes.bench, "estimate", boom)
        rep = run_nes(small_config(trials=2))
        assert rep.n_failed == 2
        assert all(t["status"] == "failed" and "SingularMetricError" in t["error"] for t in rep.trials)
        assert np.isnan(rep.mean)

    def test_non_finite_parameters_fail_trial(self):
        opt = OptimizerConfig("sgd", learning_rate=1e308, natural_gradient=False)
        cfg = small_config(nes=NesSpec(model=ModelSpec(init_std=1.0), optimizer=opt,
                                       sampler=SamplerSpec(64, 4, 5), iterations=4), trials=1)
        rep = run_nes(cfg)
        assert rep.n_failed == 1

    def test_json_and_csv(self):
        rep = run_nes(small_config())
        assert json.loads(rep.to_json())["n"] == 8
        rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
        assert len(rows) == 3 and float(rows[0]["metric"]) == rep.trials[0]["metric"]

    def test_instance_from_file(self, tmp_path):
        inst = generate_instance(8, 0.5, seed=1)
        save_instance(inst, tmp_path / "g.txt")
        rep = run_nes(small_config(instance=InstanceSpec(path=str(tmp_path / "g.txt")), trials=1))
        assert rep.instance_hash == content_hash(MaxCutInstance(8, inst.edges))


class TestBaselines:
    def test_random_empty(self):
        cfg = small_config(solver="random", instance=InstanceSpec(n=6, density=0.0), trials=4)
        rep = run_baseline(cfg)
        assert rep.solver == "random" and rep.mean == 0 and rep.std == 0

    def test_bm_triangle(self, tmp_path):
        (tmp_path / "t.txt").write_text("3 3\n0 1\n1 2\n0 2\n")
        cfg = small_config(solver="bm+rounding", instance=InstanceSpec(path=str(tmp_path / "t.txt")), trials=5)
        rep = run_baseline(cfg)
        assert rep.solver == "BM+rounding"
        assert [t["cut"] for t in rep.trials] == [2] * 5
        assert all(abs(t["sdp_value"] - 2.25) <= 1e-6 for t in rep.trials)

    def test_bm_close_to_optimum(self):
        for seed in range(3):
            cfg = small_config(solver="bm+rounding", instance=InstanceSpec(n=16, density=0.5, seed=seed), trials=10)
            rep = run_baseline(cfg)
            assert all(t["cut"] >= 0.9 * rep.optimum for t in rep.trials)

    def test_run_experiment_dispatch(self):
        assert run_experiment(small_config(solver="random", trials=1)).solver == "random"
        assert run_experiment(small_config(trials=1)).solver == "nes"


class TestGrids:
    def test_singleton_sweep_equals_run_nes(self):
        cfg = small_config()
        sweep = sweep_batch_size(cfg, [64], [1.0])
        a = strip_times(sweep.cells[(1.0, 64)].to_dict())
        b = strip_times(run_nes(cfg).to_dict())
        assert a == b
        assert len(sweep.rows()) == 1

    def test_sweep_grid(self):
        sweep = sweep_batch_size(small_config(trials=2), [32, 64], [0.5, 1.0])
        assert set(sweep.cells) == {(0.5, 32), (0.5, 64), (1.0, 32), (1.0, 64)}
        hashes = {r.instance_hash for r in sweep.cells.values()}
        assert len(hashes) == 1
        seeds = {tuple(t["seed"] for t in r.trials) for r in sweep.cells.values()}
        assert len(seeds) == 1
        rows = list(csv.DictReader(io.StringIO(sweep.to_csv())))
        assert len(rows) == 4 and "mean_ratio" in rows[0]

    def test_sweep_rejects_empty(self):
        with pytest.raises(ConfigError):
            sweep_batch_size(small_config(), [], [1.0])

    def test_singleton_ablation_equals_run_nes(self):
        cfg = small_config()
        abl = ablation_optimizers(cfg, ["sgd"], ["cRBM-1"], [True])
        a = strip_times(abl.cells[("cRBM-1", "sgd", True)].to_dict())
        b = strip_times(run_nes(cfg).to_dict())
        assert a == b

    def test_ablation_table(self):
        abl = ablation_optimizers(small_config(trials=2), ["sgd", "adamax"], ["rRBM-1", "FC"], [True, False])
        rows = abl.rows()
        assert len(rows) == 4
        assert set(rows[0]) == {"natural_gradient", "architecture", "sgd", "adamax"}
        assert "±" in rows[0]["sgd"]
        cell = abl.cells[("rRBM-1", "adamax", False)]
        assert cell.config["nes"]["optimizer"]["learning_rate"] == 5e-3
        assert cell.config["nes"]["model"]["field"] == "real"

    def test_parse_architecture(self):
        assert parse_architecture("cRBM-3") == ModelSpec("RBM", "complex", 3.0)
        assert parse_architecture("rRBM-1") == ModelSpec("RBM", "real", 1.0)
        assert parse_architecture("FC") == ModelSpec("FC", "complex", 1.0)
        assert parse_architecture("cRBM-1").label == "cRBM-1"
        with pytest.raises(ConfigError):
            parse_architecture("LSTM")

    def test_loglog_r2(self):
        x = np.array([256, 1024, 4096])
        assert loglog_r2(x, 3e-3 * x) == pytest.approx(1.0)
        assert loglog_r2(x, [1.0, 5.0, 2.0]) < 0.9


def test_baseline_spec_defaults():
    spec = BaselineSpec()
    assert spec.repeats == 100 and spec.name == "bm+rounding"
