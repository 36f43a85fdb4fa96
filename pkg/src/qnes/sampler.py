"""Sampling configurations from |psi|^2.

:func:`metropolis_sample` is the workhorse used during optimisation: parallel
single-spin-flip Metropolis chains with O(m) incremental updates of the hidden
pre-activations.  :func:`exact_distribution` and :func:`exact_sample` enumerate
the full state space and serve as oracles for small ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import AmplitudeModel, log2cosh_real, log_amplitude
from .errors import ConfigError, DegenerateStateError, DimensionError, SizeLimitError

__all__ = [
    "SamplerConfig",
    "SampleBatch",
    "metropolis_sample",
    "exact_distribution",
    "exact_sample",
    "all_configurations",
    "empirical_distribution",
    "config_index",
]

EXACT_MAX_N = 20
MAX_START_ATTEMPTS = 100
_U64 = 2**64


@dataclass(frozen=True)
class SamplerConfig:
    batch_size: int = 4096
    n_chains: int = 32
    burn_in_sweeps: int = 100
    sweep: int | None = None  # proposals per sweep; None means n
    seed: int = 0
    refresh_every: int = 32  # sweeps between exact pre-activation refreshes

    def __post_init__(self):
        if self.batch_size < 1 or self.n_chains < 1:
            raise ConfigError("batch_size and n_chains must be positive")
        if self.batch_size % self.n_chains:
            raise ConfigError(
                f"batch_size {self.batch_size} not divisible by n_chains {self.n_chains}"
            )
        if self.burn_in_sweeps < 0:
            raise ConfigError("burn_in_sweeps must be >= 0")
        if self.sweep is not None and self.sweep < 1:
            raise ConfigError("sweep length must be positive")
        if self.refresh_every < 1:
            raise ConfigError("refresh_every must be positive")


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Sampled configurations with their cached log-amplitudes.

    ``chain`` gives the chain index of every row (all zeros for i.i.d.
    batches).  ``max_drift`` is the largest discrepancy between the
    incrementally tracked ``Re log psi`` and a fresh evaluation, a health
    check on the O(m) update path.
    """

    configs: np.ndarray
    log_amps: np.ndarray
    acceptance_rate: float
    chain: np.ndarray
    max_drift: float = 0.0

    @property
    def size(self) -> int:
        return len(self.configs)

    def __len__(self):
        return len(self.configs)


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) % _U64, chain]))


def _random_config(rng, n, encoding):
    bits = rng.integers(0, 2, size=n)
    return (1 - 2 * bits) if encoding == "pm1" else bits


def _hidden_re(model: AmplitudeModel, theta):
    if model.architecture == "RBM":
        return log2cosh_real(theta)
    return (model.v * np.tanh(theta)).real


def metropolis_sample(model: AmplitudeModel, cfg: SamplerConfig) -> SampleBatch:
    """Run ``cfg.n_chains`` independent Metropolis chains targeting |psi|^2.

    Each chain starts from a uniformly random configuration (re-drawn while
    its amplitude is exactly zero), discards ``burn_in_sweeps`` sweeps and
    then records one configuration per sweep.  A proposal flips one uniformly
    chosen spin and is accepted with probability ``min(1, |psi'/psi|^2)``.
    All chains advance in lock-step for vectorisation, but each consumes only
    its own random stream, so results do not depend on how many chains share
    a step.
    """
    n = model.n
    n_chains = cfg.n_chains
    per_chain = cfg.batch_size // n_chains
    sweep = cfg.sweep or n
    n_sweeps = cfg.burn_in_sweeps + per_chain
    n_steps = n_sweeps * sweep

    starts = np.empty((n_chains, n))
    sites = np.empty((n_chains, n_steps), dtype=np.intp)
    log_u = np.empty((n_chains, n_steps))
    for ch in range(n_chains):
        rng = _chain_rng(cfg.seed, ch)
        for _ in range(MAX_START_ATTEMPTS):
            x0 = _random_config(rng, n, model.encoding)
            if np.isfinite(log_amplitude(model, x0).real):
                break
        else:
            raise DegenerateStateError(
                f"chain {ch}: no non-zero-amplitude start in {MAX_START_ATTEMPTS} draws"
            )
        starts[ch] = x0
        sites[ch] = rng.integers(0, n, size=n_steps)
        with np.errstate(divide="ignore"):
            log_u[ch] = np.log(rng.random(n_steps))

    W, b = model.W, model.b
    c_re = model.c.real
    pm1 = model.encoding == "pm1"
    rows = np.arange(n_chains)

    x = starts
    theta = x @ W.T + b
    hid = _hidden_re(model, theta)
    logp = x @ c_re + hid.sum(axis=1)  # Re log psi, tracked incrementally

    out = np.empty((n_chains, per_chain, n), dtype=np.int8)
    accepted = 0
    step = 0
    for sw in range(n_sweeps):
        for _ in range(sweep):
            s = sites[:, step]
            xs = x[rows, s]
            dx = -2.0 * xs if pm1 else 1.0 - 2.0 * xs
            theta_new = theta + W[:, s].T * dx[:, None]
            hid_new = _hidden_re(model, theta_new)
            with np.errstate(invalid="ignore"):
                delta = c_re[s] * dx + (hid_new - hid).sum(axis=1)
            acc = log_u[:, step] < 2.0 * delta
            if acc.any():
                x[acc, s[acc]] += dx[acc]
                theta[acc] = theta_new[acc]
                hid[acc] = hid_new[acc]
                logp[acc] += delta[acc]
                accepted += int(acc.sum())
            step += 1
        if (sw + 1) % cfg.refresh_every == 0:
            theta = x @ W.T + b
            hid = _hidden_re(model, theta)
            logp = x @ c_re + hid.sum(axis=1)
        if sw >= cfg.burn_in_sweeps:
            out[:, sw - cfg.burn_in_sweeps] = x

    configs = out.reshape(-1, n)
    log_amps = np.asarray(log_amplitude(model, configs), dtype=np.complex128).reshape(-1)
    final_fresh = log_amplitude(model, x).real
    drift = float(np.max(np.abs(final_fresh - logp))) if n_chains else 0.0
    return SampleBatch(
        configs=configs,
        log_amps=log_amps,
        acceptance_rate=accepted / (n_chains * n_steps) if n_steps else 1.0,
        chain=np.repeat(np.arange(n_chains), per_chain),
        max_drift=drift,
    )


def all_configurations(n: int, encoding: str = "pm1") -> np.ndarray:
    """All ``2**n`` configurations in lexicographic bit order (MSB first).

    Bit 0 maps to spin +1 in the ``pm1`` encoding and to 0 in ``01``.
    """
    if n > EXACT_MAX_N:
        raise SizeLimitError(f"enumeration limited to n <= {EXACT_MAX_N}, got n={n}")
    idx = np.arange(2**n)[:, None]
    bits = ((idx >> np.arange(n - 1, -1, -1)) & 1).astype(np.int8)
    return (1 - 2 * bits).astype(np.int8) if encoding == "pm1" else bits


def config_index(configs, encoding: str = "pm1") -> np.ndarray:
    """Inverse of :func:`all_configurations`: row index of each configuration."""
    x = np.atleast_2d(np.asarray(configs))
    bits = (x < 0).astype(np.int64) if encoding == "pm1" else x.astype(np.int64)
    weights = 1 << np.arange(x.shape[1] - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def exact_distribution(model: AmplitudeModel) -> np.ndarray:
    """Normalised ``|psi(x)|^2`` over :func:`all_configurations` order."""
    configs = all_configurations(model.n, model.encoding)
    chunk = 1 << 15
    logp = np.concatenate(
        [
            2.0 * np.asarray(log_amplitude(model, configs[i : i + chunk])).real
            for i in range(0, len(configs), chunk)
        ]
    )
    top = logp.max()
    if not np.isfinite(top):
        raise DegenerateStateError("all amplitudes vanish")
    p = np.exp(logp - top)
    return p / p.sum()


def exact_sample(model: AmplitudeModel, count: int, seed: int = 0) -> SampleBatch:
    """I.i.d. draws from :func:`exact_distribution` by inverse CDF."""
    if count < 0:
        raise ConfigError("count must be >= 0")
    p = exact_distribution(model)
    configs = all_configurations(model.n, model.encoding)
    cdf = np.cumsum(p)
    u = np.random.default_rng(int(seed) % _U64).random(count) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(p) - 1)
    rows = configs[idx]
    log_amps = (
        np.asarray(log_amplitude(model, rows), dtype=np.complex128).reshape(-1)
        if count
        else np.zeros(0, dtype=np.complex128)
    )
    return SampleBatch(
        configs=rows.reshape(count, model.n),
        log_amps=log_amps,
        acceptance_rate=1.0,
        chain=np.zeros(count, dtype=np.intp),
    )


def empirical_distribution(batch: SampleBatch, n: int, encoding: str = "pm1") -> np.ndarray:
    if batch.configs.shape[1:] != (n,):
        raise DimensionError("batch width does not match n")
    counts = np.bincount(config_index(batch.configs, encoding), minlength=2**n)
    return counts / max(len(batch), 1)
