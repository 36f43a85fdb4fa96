import numpy as np
import pytest

from qnes.baselines import (
    LowRankFactor,
    burer_monteiro,
    default_rank,
    hyperplane_round,
    random_cut,
    ubd_estimate,
)
from qnes.errors import ConfigError
from qnes.problem import MaxCutInstance, brute_force_optimum, generate_instance

EMPTY = MaxCutInstance(5, ())
EDGE = MaxCutInstance(2, ((0, 1),))
TRIANGLE = MaxCutInstance(3, ((0, 1), (1, 2), (0, 2)))
K4 = MaxCutInstance(4, tuple((i, j) for i in range(4) for j in range(i + 1, 4)))


def triangle_factor():
    ang = 2 * np.pi * np.arange(3) / 3
    return LowRankFactor(Y=np.column_stack([np.cos(ang), np.sin(ang)]), p=2, sdp_value=2.25)


class TestRandomCut:
    def test_empty(self):
        assert random_cut(EMPTY, seed=0)[0] == 0

    def test_k4_mean(self):
        mean = np.mean([random_cut(K4, seed=s, trials=1)[0] for s in range(10_000)])
        assert abs(mean - 3.0) <= 0.02 * 3.0

    def test_single_edge(self):
        assert random_cut(EDGE, seed=3, trials=10)[0] == 1

    def test_returns_matching_config(self):
        inst = generate_instance(12, 0.5, seed=1)
        cut, x = random_cut(inst, seed=2, trials=50)
        xi, xj = x[inst.edge_array[:, 0]], x[inst.edge_array[:, 1]]
        assert cut == int(np.sum(xi != xj))

    def test_trials_positive(self):
        with pytest.raises(ConfigError):
            random_cut(EDGE, trials=0)


class TestBurerMonteiro:
    def test_single_edge(self):
        f = burer_monteiro(EDGE, p=2, seed=0)
        assert f.sdp_value == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(f.Y[0], -f.Y[1], atol=1e-5)

    def test_triangle(self):
        for seed in range(5):
            f = burer_monteiro(TRIANGLE, p=2, seed=seed)
            assert f.sdp_value == pytest.approx(2.25, abs=1e-6)
            gram = f.Y @ f.Y.T
            np.testing.assert_allclose(gram[np.triu_indices(3, 1)], -0.5, atol=1e-4)

    def test_triangle_equiangular_oracle(self):
        # Equiangular unit vectors at angle phi give 3 (1 - cos phi) / 2, maximal at 120 degrees.
        phi = np.linspace(0, np.pi, 100_001)
        oracle = np.max(3 * (1 - np.cos(np.minimum(phi, 2 * np.pi / 3))) / 2)
        assert burer_monteiro(TRIANGLE, p=3, seed=1).sdp_value == pytest.approx(oracle, abs=1e-6)

    def test_empty(self):
        assert burer_monteiro(EMPTY, seed=0).sdp_value == 0.0

    def test_rank_validation(self):
        with pytest.raises(ConfigError):
            burer_monteiro(TRIANGLE, p=1)

    def test_default_rank(self):
        assert default_rank(50) == 11
        assert burer_monteiro(TRIANGLE).p == default_rank(3)

    @pytest.mark.parametrize("seed", range(5))
    def test_unit_rows_and_range(self, seed):
        inst = generate_instance(30, 0.4, seed=seed)
        f = burer_monteiro(inst, seed=seed)
        assert np.max(np.abs(np.linalg.norm(f.Y, axis=1) - 1)) <= 1e-10
        assert 0.0 <= f.sdp_value <= inst.n_edges
        assert f.converged

    def test_value_matches_factor(self):
        inst = generate_instance(20, 0.5, seed=3)
        f = burer_monteiro(inst, seed=0)
        e = inst.edge_array
        direct = np.sum(1 - np.einsum("ij,ij->i", f.Y[e[:, 0]], f.Y[e[:, 1]])) / 2
        assert f.sdp_value == pytest.approx(direct, rel=1e-12)

    def test_monotone_in_rank(self):
        for seed in range(5):
            inst = generate_instance(16, 0.5, seed=100 + seed)
            vals = [burer_monteiro(inst, p=p, seed=seed).sdp_value for p in (2, 3, 6)]
            assert vals[0] <= vals[1] + 1e-6 and vals[1] <= vals[2] + 1e-6

    def test_not_converged_flag(self):
        f = burer_monteiro(generate_instance(40, 0.5, seed=1), seed=0, max_iters=2)
        assert not f.converged and f.iterations == 2

    def test_deterministic(self):
        inst = generate_instance(20, 0.5, seed=4)
        a, b = burer_monteiro(inst, seed=7), burer_monteiro(inst, seed=7)
        np.testing.assert_array_equal(a.Y, b.Y)


class TestHyperplaneRound:
    def test_single_edge_antipodal(self):
        f = LowRankFactor(Y=np.array([[1.0, 0.0], [-1.0, 0.0]]), p=2, sdp_value=1.0)
        for seed in range(20):
            assert hyperplane_round(f, EDGE, seed=seed, repeats=1)[0] == 1

    def test_triangle_every_hyperplane_cuts_two(self):
        f = triangle_factor()
        for seed in range(20):
            assert hyperplane_round(f, TRIANGLE, seed=seed, repeats=1)[0] == 2
        assert hyperplane_round(f, TRIANGLE, seed=0, repeats=100)[0] == 2

    def test_zero_breaks_to_plus(self):
        f = LowRankFactor(Y=np.zeros((2, 2)), p=2, sdp_value=0.0)
        _, x = hyperplane_round(f, EDGE, repeats=1)
        np.testing.assert_array_equal(x, [1, 1])

    def test_repeats_positive(self):
        with pytest.raises(ConfigError):
            hyperplane_round(triangle_factor(), TRIANGLE, repeats=0)

    def test_rounding_quality(self):
        ratios, dominated = [], []
        for seed in range(20):
            inst = generate_instance(16, 0.5, seed=200 + seed)
            f = burer_monteiro(inst, seed=seed)
            cut, _ = hyperplane_round(f, inst, seed=seed, repeats=100)
            ratios.append(cut / f.sdp_value)
            dominated.append(cut <= f.sdp_value + 1e-9)
        assert np.mean(ratios) >= 0.87
        assert all(dominated)


class TestUbd:
    def test_single_edge(self):
        u = ubd_estimate(EDGE)
        assert u.spectral == pytest.approx(1.0, rel=1e-8)
        assert u.bm_value == pytest.approx(1.0, abs=1e-9)
        assert u.estimate == pytest.approx(1.0, abs=1e-8)

    def test_triangle(self):
        u = ubd_estimate(TRIANGLE)
        assert u.bm_value == pytest.approx(2.25, abs=1e-6)
        assert u.spectral == pytest.approx(2.25, rel=1e-8)
        assert u.estimate == pytest.approx(2.25, abs=1e-6)

    @pytest.mark.parametrize("seed", range(10))
    def test_dominates_optimum(self, seed):
        inst = generate_instance(16, 0.5, seed=seed)
        u = ubd_estimate(inst)
        best, _ = brute_force_optimum(inst)
        assert u.estimate >= best
        assert u.estimate == min(u.spectral, u.bm_value)
        assert u.rank == default_rank(16)
