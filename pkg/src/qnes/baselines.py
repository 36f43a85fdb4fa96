"""Reference Max-Cut solvers.

* random assignment (the 0.5-approximation),
* Burer-Monteiro: the SDP relaxation ``max sum_E (1 - <Y_i, Y_j>)/2`` over
  unit-norm rows ``Y_i in R^p``, solved by Riemannian gradient ascent on the
  product of spheres,
* Goemans-Williamson style random-hyperplane rounding of such a factor,
* an estimate of the SDP optimum used as the approximation-ratio denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .problem import MaxCutInstance, cut_values, spectral_upper_bound

__all__ = [
    "LowRankFactor",
    "UbdEstimate",
    "default_rank",
    "random_cut",
    "burer_monteiro",
    "hyperplane_round",
    "ubd_estimate",
]


@dataclass(frozen=True, eq=False)
class LowRankFactor:
    Y: np.ndarray
    p: int
    sdp_value: float
    converged: bool = True
    iterations: int = 0
    grad_norm: float = 0.0


@dataclass(frozen=True)
class UbdEstimate:
    estimate: float
    spectral: float
    bm_value: float
    rank: int


def default_rank(n: int) -> int:
    return math.ceil(math.sqrt(2 * n)) + 1


def random_cut(instance: MaxCutInstance, seed: int = 0, trials: int = 1) -> tuple[int, np.ndarray]:
    """Best of ``trials`` uniformly random assignments."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    x = 1 - 2 * rng.integers(0, 2, size=(trials, instance.n), dtype=np.int8)
    cuts = cut_values(instance, x)
    k = int(np.argmax(cuts))
    return int(cuts[k]), x[k]


def _normalize_rows(Y):
    return Y / np.linalg.norm(Y, axis=1, keepdims=True)


def _bm_value(A, Y, n_edges):
    return n_edges / 2.0 - 0.25 * float(np.einsum("ij,ij->", Y, A @ Y))


def burer_monteiro(
    instance: MaxCutInstance,
    p: int | None = None,
    seed: int = 0,
    max_iters: int = 10_000,
    tol: float = 1e-7,
) -> LowRankFactor:
    """Maximise the low-rank SDP objective by Riemannian ascent.

    Steps use the Barzilai-Borwein length with Armijo backtracking; the
    retraction renormalises rows.  Iteration stops once the Riemannian
    gradient norm drops to ``tol * |E|``.
    """
    n = instance.n
    p = default_rank(n) if p is None else p
    if p < 2:
        raise ConfigError("rank p must be >= 2")
    A = instance.adjacency
    m = instance.n_edges
    rng = np.random.default_rng(seed)
    Y = _normalize_rows(rng.standard_normal((n, p)))
    if m == 0:
        return LowRankFactor(Y=Y, p=p, sdp_value=0.0)

    def rgrad(Y):
        G = -0.5 * (A @ Y)
        return G - np.einsum("ij,ij->i", G, Y)[:, None] * Y

    val = _bm_value(A, Y, m)
    R = rgrad(Y)
    step = 1.0 / max(float(A.sum(axis=1).max()), 1.0)
    Y_prev = R_prev = None
    converged = False
    it = 0
    gnorm = float(np.linalg.norm(R))
    for it in range(1, max_iters + 1):
        if gnorm <= tol * m:
            converged = True
            break
        if Y_prev is not None:
            s = Y - Y_prev
            yv = R_prev - R  # gradient change of the minimised -F
            sy = float(np.einsum("ij,ij->", s, yv))
            if sy > 0:
                step = float(np.einsum("ij,ij->", s, s)) / sy
        g2 = gnorm * gnorm
        t = step
        for _ in range(60):
            Y_new = _normalize_rows(Y + t * R)
            val_new = _bm_value(A, Y_new, m)
            if val_new >= val + 1e-4 * t * g2:
                break
            t *= 0.5
        else:
            break  # no ascent possible at machine precision
        Y_prev, R_prev = Y, R
        Y, val = Y_new, val_new
        R = rgrad(Y)
        gnorm = float(np.linalg.norm(R))
        step = t
    else:
        converged = gnorm <= tol * m
    return LowRankFactor(
        Y=Y, p=p, sdp_value=float(val), converged=converged, iterations=it, grad_norm=gnorm
    )


def hyperplane_round(
    factor: LowRankFactor, instance: MaxCutInstance, seed: int = 0, repeats: int = 100
) -> tuple[int, np.ndarray]:
    """Best cut over ``repeats`` random hyperplanes through the origin."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    r = rng.standard_normal((factor.p, repeats))
    proj = factor.Y @ r
    x = np.where(proj >= 0, 1, -1).astype(np.int8).T
    cuts = cut_values(instance, x)
    k = int(np.argmax(cuts))
    return int(cuts[k]), x[k]


def ubd_estimate(instance: MaxCutInstance, seeds=(0, 1, 2)) -> UbdEstimate:
    """Denominator for approximation ratios.

    The Burer-Monteiro value (best of several seeds) approaches the SDP
    optimum from below; the spectral bound caps it from above with a
    certificate.  The estimate is the smaller of the two.
    """
    p = default_rank(instance.n)
    spectral = spectral_upper_bound(instance) if instance.n >= 2 else 0.0
    bm = max(burer_monteiro(instance, p=p, seed=s).sdp_value for s in seeds)
    return UbdEstimate(estimate=min(spectral, bm), spectral=spectral, bm_value=bm, rank=p)
