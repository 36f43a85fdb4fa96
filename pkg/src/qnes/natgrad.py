"""Stochastic estimates of the energy gradient and metric, and the update rules.

With per-sample scores ``O_k(x) = d log psi(x) / d theta_k`` and local energy
``E(x) = f(x)`` the estimator returns the centred covariances

    g_k  = <conj(O_k) E> - <conj(O_k)><E>
    S_kl = <conj(O_k) O_l> - <conj(O_k)><O_l>

and the natural-gradient (stochastic reconfiguration) step is
``theta <- theta - eta (S + lam I)^{-1} g``.  For a real model with
``p = psi^2 / Z`` the score of ``p`` is ``2 (O - <O>)``, so the Fisher
information equals ``4 S`` and ``dL/dtheta = 2 g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.linalg import blas
from scipy.sparse.linalg import LinearOperator, cg

from .ansatz import AmplitudeModel, flatten, log_derivatives, unflatten
from .errors import (
    ConfigError,
    DegenerateStateError,
    DimensionError,
    InsufficientSamplesError,
    NormalizationError,
    SingularMetricError,
)
from .problem import MaxCutInstance, cut_values, objective
from .sampler import SampleBatch, all_configurations, exact_distribution

__all__ = [
    "EstimatorOutput",
    "OptimizerConfig",
    "OptimizerState",
    "SolveInfo",
    "local_energy",
    "estimate",
    "exact_estimate",
    "solve_metric",
    "natural_gradient_step",
    "init_optimizer_state",
    "optimizer_step",
    "default_learning_rate",
    "fisher_rao_distance",
    "fubini_study_distance",
    "OPTIMIZER_KINDS",
]

OPTIMIZER_KINDS = ("sgd", "momentum", "rmsprop", "adadelta", "adamax")
DENSE_MAX_D = 5000
PINV_CUTOFF = 1e-10


def local_energy(instance: MaxCutInstance, x) -> float:
    """For a diagonal cost operator the local energy is just ``f(x)``."""
    return float(objective(instance, x).f_value)


def _gram(x: np.ndarray) -> np.ndarray:
    """Full Hermitian ``x^H x`` via a rank-k BLAS update."""
    a = np.conj(x).T
    if np.iscomplexobj(a):
        upper = blas.zherk(1.0, a, lower=0)
        return np.triu(upper) + np.triu(upper, 1).conj().T
    upper = blas.dsyrk(1.0, a, lower=0)
    return np.triu(upper) + np.triu(upper, 1).T


@dataclass(eq=False)
class EstimatorOutput:
    """Batch estimates at one parameter point.

    The metric is materialised lazily from ``scores``, the weighted centred
    score matrix ``A`` with ``S = A^H A`` and ``g = A^H e``.
    """

    energy_mean: float
    energy_var: float
    grad: np.ndarray
    batch_size: int
    scores: np.ndarray = field(repr=False)
    centred_energy: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)

    @cached_property
    def metric(self) -> np.ndarray:
        return _gram(self.scores)

    @property
    def d(self) -> int:
        return self.grad.shape[0]

    def metric_matvec(self, v: np.ndarray) -> np.ndarray:
        a = self.scores
        return np.conj(a).T @ (a @ v)


def estimate(model: AmplitudeModel, batch: SampleBatch, instance: MaxCutInstance, weights=None) -> EstimatorOutput:
    """Energy, gradient and metric estimates from a batch.

    ``weights`` turns the batch average into a weighted one; passing the
    exact probabilities of every configuration gives exact expectations.
    """
    configs = batch.configs
    n_samples = len(configs)
    if n_samples < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {n_samples}")
    if model.encoding != "pm1":
        raise DimensionError("energy estimation requires the +-1 spin encoding")
    if weights is None:
        w = np.full(n_samples, 1.0 / n_samples)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n_samples,):
            raise DimensionError("weights must have one entry per sample")
        w = w / w.sum()
    energies = -cut_values(instance, configs).astype(np.float64)
    e_mean = float(w @ energies)
    ec = energies - e_mean
    O = log_derivatives(model, configs)
    O -= w @ O
    sw = np.sqrt(w)
    O *= sw[:, None]
    e = sw * ec
    grad = np.conj(O).T @ e
    return EstimatorOutput(
        energy_mean=e_mean,
        energy_var=float(w @ (ec * ec)),
        grad=grad,
        batch_size=n_samples,
        scores=O,
        centred_energy=e,
        energies=energies,
    )


def exact_estimate(model: AmplitudeModel, instance: MaxCutInstance) -> EstimatorOutput:
    """Exact expectations under |psi|^2 by full enumeration (``n <= 20``)."""
    p = exact_distribution(model)
    configs = all_configurations(model.n, model.encoding)
    batch = SampleBatch(
        configs=configs,
        log_amps=np.zeros(len(configs), dtype=np.complex128),
        acceptance_rate=1.0,
        chain=np.zeros(len(configs), dtype=np.intp),
    )
    return estimate(model, batch, instance, weights=p)


# -- linear solves -----------------------------------------------------------


@dataclass(frozen=True)
class SolveInfo:
    method: str
    residual: float
    iterations: int = 0


def _rel_residual(est: EstimatorOutput, delta, rhs, lam, shift_diag=None) -> float:
    lhs = est.metric_matvec(delta) + (lam * delta if shift_diag is None else shift_diag * delta)
    denom = np.linalg.norm(rhs)
    return float(np.linalg.norm(lhs - rhs) / denom) if denom > 0 else float(np.linalg.norm(lhs))


def _pinv_solve(S, rhs, cutoff=PINV_CUTOFF):
    w, V = np.linalg.eigh(S)
    top = max(float(w.max()), 0.0)
    keep = w > cutoff * top if top > 0 else np.zeros_like(w, dtype=bool)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return V @ (inv * (np.conj(V).T @ rhs))


def _hermitian_solve(M, rhs, lam):
    """Cholesky when the shifted system is positive definite, else Bunch-Kaufman."""
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(M, check_finite=False), rhs, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.solve(M, rhs, assume_a="her" if np.iscomplexobj(M) else "sym", check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularMetricError(str(exc), {"d": M.shape[0], "lam": lam}) from exc


def solve_metric(
    est: EstimatorOutput,
    lam: float,
    rhs=None,
    solver: str = "auto",
    shift_mode: str = "uniform",
    cg_tol: float = 1e-10,
    cg_maxiter: int | None = None,
) -> tuple[np.ndarray, SolveInfo]:
    """Solve ``(S + shift) delta = rhs`` (``rhs`` defaults to the gradient).

    ``shift`` is ``lam I`` (``shift_mode="uniform"``) or ``lam diag(S)``
    (``"scaled"``).  Solvers:

    ``dense``  Cholesky factorisation of the d x d system (Bunch-Kaufman
               fallback if the shifted matrix is not numerically definite).
    ``sample`` the same system solved in the N x N sample space,
               ``delta = A^H (A A^H + lam I)^{-1} e``; exact, cheaper when N < d.
    ``cg``     matrix-free conjugate gradients using products with ``A``.
    ``pinv``   eigendecomposition pseudo-inverse; used whenever ``lam == 0``.

    ``auto`` picks ``pinv`` for ``lam == 0``, else ``sample``/``dense`` by
    the smaller dimension while ``d <= 5000``, else ``cg``.
    """
    if lam < 0:
        raise ConfigError("shift must be non-negative")
    if shift_mode not in ("uniform", "scaled"):
        raise ConfigError(f"unknown shift mode {shift_mode!r}")
    default_rhs = rhs is None
    rhs = est.grad if default_rhs else np.asarray(rhs)
    if rhs.shape != (est.d,):
        raise DimensionError(f"right-hand side has shape {rhs.shape}, expected ({est.d},)")
    d, n_samples = est.d, est.scores.shape[0]
    if solver == "auto":
        if lam == 0:
            solver = "pinv"
        elif d <= DENSE_MAX_D:
            solver = "sample" if (n_samples < d and shift_mode == "uniform" and default_rhs) else "dense"
        else:
            solver = "cg"
    if lam == 0 and solver != "pinv":
        solver = "pinv"

    shift_diag = None
    if shift_mode == "scaled":
        shift_diag = lam * np.einsum("ij,ij->j", np.conj(est.scores), est.scores).real
        if solver == "sample":
            raise ConfigError("sample-space solve supports only the uniform shift")

    iters = 0
    with np.errstate(all="ignore"):
        if solver == "pinv":
            delta = _pinv_solve(est.metric, rhs)
        elif solver == "dense":
            S = est.metric.copy()
            S[np.diag_indices(d)] += lam if shift_diag is None else shift_diag
            delta = _hermitian_solve(S, rhs, lam)
        elif solver == "sample":
            if not default_rhs:
                raise ConfigError("sample-space solve needs the estimator's own gradient")
            A = est.scores
            K = _gram(np.conj(A).T)
            K[np.diag_indices(n_samples)] += lam
            y = _hermitian_solve(K, est.centred_energy.astype(K.dtype), lam)
            delta = np.conj(A).T @ y
        elif solver == "cg":
            diag = lam if shift_diag is None else shift_diag

            def mv(v):
                return est.metric_matvec(v) + diag * v

            count = [0]

            def cb(_):
                count[0] += 1

            op = LinearOperator((d, d), matvec=mv, dtype=np.result_type(est.scores, rhs))
            delta, status = cg(op, rhs, rtol=cg_tol, atol=0.0, maxiter=cg_maxiter or 10 * d, callback=cb)
            iters = count[0]
        else:
            raise ConfigError(f"unknown solver {solver!r}")

    if not np.all(np.isfinite(delta)):
        diag = {"d": d, "lam": lam, "solver": solver}
        try:
            ev = np.linalg.eigvalsh(est.metric)
            diag.update(eig_min=float(ev[0]), eig_max=float(ev[-1]))
        except np.linalg.LinAlgError:
            pass
        raise SingularMetricError("metric solve produced non-finite values", diag)
    resid = _rel_residual(est, delta, rhs, lam if shift_mode == "uniform" else 0.0, shift_diag)
    return delta, SolveInfo(method=solver, residual=resid, iterations=iters)


def natural_gradient_step(
    model: AmplitudeModel,
    est: EstimatorOutput,
    eta: float,
    lam: float,
    solver: str = "auto",
    shift_mode: str = "uniform",
) -> AmplitudeModel:
    """``theta - eta (S + lam I)^{-1} g``; pseudo-inverse when ``lam == 0``."""
    if est.d != model.d:
        raise DimensionError(f"estimate has d={est.d}, model has d={model.d}")
    delta, _ = solve_metric(est, lam, solver=solver, shift_mode=shift_mode)
    return _apply(model, -eta * delta)


def _apply(model: AmplitudeModel, step: np.ndarray) -> AmplitudeModel:
    theta = flatten(model)
    if model.field == "real":
        step = step.real
    return unflatten(model, theta + step)


# -- optimizer zoo -----------------------------------------------------------


_DEFAULT_LR = {"sgd": 5e-2, "momentum": 5e-2, "rmsprop": 5e-3, "adadelta": 1.0, "adamax": 5e-3}


def default_learning_rate(kind: str) -> float:
    return _DEFAULT_LR[kind.lower()]


@dataclass(frozen=True)
class OptimizerConfig:
    """Update rule plus hyperparameters.

    ``rho`` is the decay of the squared-direction average (RMSprop, Adadelta);
    ``None`` selects 0.9 for RMSprop and 0.95 for Adadelta.
    """

    kind: str = "sgd"
    learning_rate: float | None = None
    natural_gradient: bool = True
    shift: float = 0.1
    momentum: float = 0.9
    rho: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    solver: str = "auto"
    shift_mode: str = "uniform"

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in OPTIMIZER_KINDS:
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.learning_rate is None:
            object.__setattr__(self, "learning_rate", _DEFAULT_LR[kind])
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.shift < 0:
            raise ConfigError("shift must be non-negative")
        if self.rho is None:
            object.__setattr__(self, "rho", 0.95 if kind == "adadelta" else 0.9)


@dataclass(frozen=True, eq=False)
class OptimizerState:
    kind: str
    t: int
    buffers: dict
    last_solve: SolveInfo | None = None


def init_optimizer_state(kind: str, d: int, dtype=np.complex128) -> OptimizerState:
    kind = kind.lower()
    names = {
        "sgd": (),
        "momentum": ("velocity",),
        "rmsprop": ("sq",),
        "adadelta": ("sq", "sq_step"),
        "adamax": ("m", "u"),
    }[kind]
    buffers = {}
    for name in names:
        real = name in ("sq", "sq_step", "u")
        buffers[name] = np.zeros(d, dtype=np.float64 if real else dtype)
    return OptimizerState(kind=kind, t=0, buffers=buffers)


def optimizer_step(
    state: OptimizerState,
    model: AmplitudeModel,
    est: EstimatorOutput,
    cfg: OptimizerConfig,
) -> tuple[AmplitudeModel, OptimizerState]:
    """Apply one update of ``cfg.kind``.

    With ``natural_gradient`` the direction fed to the rule is
    ``(S + shift I)^{-1} g``; otherwise it is ``g``.  Squared magnitudes use
    ``|.|^2`` so the same rules serve complex parameters.
    """
    if state.kind != cfg.kind:
        raise ConfigError(f"state is for {state.kind!r}, config asks for {cfg.kind!r}")
    if any(buf.shape != (model.d,) for buf in state.buffers.values()) or est.d != model.d:
        raise DimensionError("optimizer state / estimate dimension does not match the model")

    info = None
    if cfg.natural_gradient:
        direction, info = solve_metric(est, cfg.shift, solver=cfg.solver, shift_mode=cfg.shift_mode)
    else:
        direction = est.grad
    if model.field == "real":
        direction = direction.real

    lr, eps = cfg.learning_rate, cfg.eps
    t = state.t + 1
    buf = {k: v.copy() for k, v in state.buffers.items()}
    mag2 = (direction * np.conj(direction)).real

    if cfg.kind == "sgd":
        step = -lr * direction
    elif cfg.kind == "momentum":
        buf["velocity"] = cfg.momentum * buf["velocity"] - lr * direction
        step = buf["velocity"]
    elif cfg.kind == "rmsprop":
        buf["sq"] = cfg.rho * buf["sq"] + (1 - cfg.rho) * mag2
        step = -lr * direction / (np.sqrt(buf["sq"]) + eps)
    elif cfg.kind == "adadelta":
        buf["sq"] = cfg.rho * buf["sq"] + (1 - cfg.rho) * mag2
        upd = -np.sqrt(buf["sq_step"] + eps) / np.sqrt(buf["sq"] + eps) * direction
        buf["sq_step"] = cfg.rho * buf["sq_step"] + (1 - cfg.rho) * (upd * np.conj(upd)).real
        step = lr * upd
    else:  # adamax
        buf["m"] = cfg.beta1 * buf["m"] + (1 - cfg.beta1) * direction
        buf["u"] = np.maximum(cfg.beta2 * buf["u"], np.abs(direction))
        step = -(lr / (1 - cfg.beta1**t)) * buf["m"] / (buf["u"] + eps)

    new_state = replace(state, t=t, buffers=buf, last_solve=info)
    return _apply(model, step), new_state


# -- information geometry ----------------------------------------------------


def fisher_rao_distance(p, q, atol: float = 1e-9) -> float:
    """``arccos <sqrt p, sqrt q>`` for probability vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError("distributions must have the same length")
    for name, r in (("p", p), ("q", q)):
        if np.any(r < 0) or abs(r.sum() - 1.0) > atol:
            raise NormalizationError(f"{name} is not a probability vector")
    bc = float(np.sqrt(p) @ np.sqrt(q))
    return float(np.arccos(np.clip(bc, -1.0, 1.0)))


def fubini_study_distance(psi, phi) -> float:
    """``arccos(|<psi, phi>| / (|psi| |phi|))``; invariant under rescaling either vector."""
    psi = np.asarray(psi, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    if psi.shape != phi.shape:
        raise DimensionError("state vectors must have the same length")
    npsi, nphi = np.linalg.norm(psi), np.linalg.norm(phi)
    if npsi == 0 or nphi == 0:
        raise DegenerateStateError("zero vector has no projective class")
    overlap = abs(np.vdot(psi, phi)) / (npsi * nphi)
    return float(np.arccos(np.clip(overlap, 0.0, 1.0)))
