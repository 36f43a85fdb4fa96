"""Amplitude models psi_theta over spin configurations.

Two architectures share one parameter layout ``W`` (m x n), ``b`` (m), ``c`` (n):

RBM
    Hidden units summed out in closed form::

        log psi(x) = <x, c> + sum_j log(2 cosh(W_j . x + b_j))

FC
    Single hidden tanh layer with a linear read-out ``v`` (m) into the
    log-amplitude::

        log psi(x) = <x, c> + sum_j v_j tanh(W_j . x + b_j)

Parameters are real or complex.  Complex models are treated as holomorphic
in their parameters, so ``log_derivatives`` returns d log psi / d theta
without conjugation.

Flat parameter order is ``[vec(W) row-major, b, c]`` for RBM and
``[vec(W), b, v, c]`` for FC.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, NumericError

__all__ = [
    "AmplitudeModel",
    "init_parameters",
    "log_amplitude",
    "log_derivatives",
    "unnormalized_probability",
    "parity_model",
    "flatten",
    "unflatten",
    "hidden_preactivations",
    "log2cosh",
    "log2cosh_real",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

ARCHITECTURES = ("RBM", "FC")
FIELDS = ("real", "complex")
ENCODINGS = ("pm1", "01")


@dataclass(frozen=True, eq=False)
class AmplitudeModel:
    """Immutable parameter container; updates go through :func:`unflatten`."""

    architecture: str
    field: str
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    v: np.ndarray | None = None
    encoding: str = "pm1"

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        if self.field not in FIELDS:
            raise ConfigError(f"unknown field {self.field!r}")
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"unknown encoding {self.encoding!r}")
        dtype = np.float64 if self.field == "real" else np.complex128
        arrays = {}
        for name in ("W", "b", "c", "v"):
            a = getattr(self, name)
            if a is None:
                continue
            a = np.asarray(a)
            if self.field == "real":
                if np.iscomplexobj(a):
                    if np.any(a.imag != 0):
                        raise ConfigError(f"real model given complex {name}")
                    a = a.real
            a = np.array(a, dtype=dtype)
            a.setflags(write=False)
            arrays[name] = a
        for k, a in arrays.items():
            object.__setattr__(self, k, a)
        m, n = self.W.shape
        if self.b.shape != (m,) or self.c.shape != (n,):
            raise DimensionError(f"inconsistent shapes W{self.W.shape} b{self.b.shape} c{self.c.shape}")
        if self.architecture == "FC":
            if self.v is None or self.v.shape != (m,):
                raise DimensionError("FC model needs a read-out vector v of length m")
        elif self.v is not None:
            raise DimensionError("RBM model takes no read-out vector")

    @property
    def n(self) -> int:
        return self.W.shape[1]

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def alpha(self) -> float:
        return self.m / self.n

    @property
    def d(self) -> int:
        return self.W.size + self.b.size + self.c.size + (0 if self.v is None else self.v.size)

    @property
    def dtype(self):
        return self.W.dtype

    def is_finite(self) -> bool:
        parts = [self.W, self.b, self.c] + ([] if self.v is None else [self.v])
        return all(np.all(np.isfinite(p)) for p in parts)

    def __repr__(self):
        return (
            f"AmplitudeModel({self.architecture}, {self.field}, n={self.n}, m={self.m}, "
            f"encoding={self.encoding!r})"
        )


def flatten(model: AmplitudeModel) -> np.ndarray:
    parts = [model.W.ravel(), model.b]
    if model.architecture == "FC":
        parts.append(model.v)
    parts.append(model.c)
    return np.concatenate(parts)


def unflatten(model: AmplitudeModel, flat) -> AmplitudeModel:
    """New model with ``model``'s structure and parameters taken from ``flat``."""
    flat = np.asarray(flat)
    if flat.shape != (model.d,):
        raise DimensionError(f"expected {model.d} parameters, got shape {flat.shape}")
    m, n = model.m, model.n
    pos = 0

    def take(k):
        nonlocal pos
        out = flat[pos : pos + k]
        pos += k
        return out

    W = take(m * n).reshape(m, n)
    b = take(m)
    v = take(m) if model.architecture == "FC" else None
    c = take(n)
    return replace(model, W=W, b=b, c=c, v=v)


def init_parameters(
    architecture: str = "RBM",
    field: str = "complex",
    n: int = 1,
    alpha: float = 1.0,
    std: float = 0.01,
    seed: int = 0,
) -> AmplitudeModel:
    """Gaussian(0, std^2) initialisation with ``m = round(alpha * n)`` hidden units.

    Complex parameters draw real and imaginary parts independently, each with
    standard deviation ``std``.
    """
    if alpha <= 0:
        raise ConfigError(f"hidden density must be positive, got {alpha}")
    if std < 0:
        raise ConfigError(f"std must be non-negative, got {std}")
    architecture = architecture.upper()
    m = int(round(alpha * n))
    if m < 1:
        raise ConfigError(f"alpha={alpha} gives no hidden units at n={n}")
    rng = np.random.default_rng(seed)
    shapes = {"W": (m, n), "b": (m,), "c": (n,)}
    if architecture == "FC":
        shapes["v"] = (m,)
    params = {}
    for name, shape in shapes.items():
        p = std * rng.standard_normal(shape)
        if field == "complex":
            p = p + 1j * std * rng.standard_normal(shape)
        params[name] = p
    return AmplitudeModel(architecture=architecture, field=field, **params)


def parity_model(n: int) -> AmplitudeModel:
    """One-hidden-unit complex RBM over ``{0,1}`` bits with ``|psi|^2`` = 4 cos^2(pi |x| / 2).

    The squared amplitude vanishes exactly on odd Hamming weight, so the
    normalised law is uniform on the ``2**(n-1)`` even-weight strings.
    """
    if n < 1:
        raise ConfigError(f"need n >= 1, got {n}")
    W = np.full((1, n), 0.5j * np.pi)
    return AmplitudeModel(
        architecture="RBM",
        field="complex",
        W=W,
        b=np.zeros(1),
        c=np.zeros(n),
        encoding="01",
    )


# -- numerics ----------------------------------------------------------------


def log2cosh_real(t):
    """``Re log(2 cosh t)`` for real or complex ``t``; ``-inf`` where cosh vanishes."""
    t = np.asarray(t)
    if not np.iscomplexobj(t):
        return np.logaddexp(t, -t)
    a = np.abs(t.real)
    e = np.exp(-2.0 * a)
    # |1 + exp(-2s)|^2 with s = sign(Re t) t
    arg = np.maximum(2.0 * e * np.cos(2.0 * t.imag) + e * e, -1.0)
    with np.errstate(divide="ignore"):
        return a + 0.5 * np.log1p(arg)


def log2cosh(t):
    """Principal ``log(2 cosh t)`` evaluated without overflow."""
    t = np.asarray(t)
    if not np.iscomplexobj(t):
        return np.logaddexp(t, -t)
    s = np.where(t.real < 0, -t, t)
    re = log2cosh_real(t)
    im = s.imag + np.angle(1.0 + np.exp(-2.0 * s))
    im = im - 2.0 * np.pi * np.round(im / (2.0 * np.pi))
    return re + 1j * im


def _as_configs(model: AmplitudeModel, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != model.n:
        raise DimensionError(f"configuration length {x.shape[-1]} does not match n={model.n}")
    if model.encoding == "pm1":
        ok = (x == 1) | (x == -1)
    else:
        ok = (x == 0) | (x == 1)
    if not np.all(ok):
        raise DimensionError(f"configuration entries invalid for encoding {model.encoding!r}")
    return x.astype(np.float64, copy=False)


def _check_finite(model: AmplitudeModel):
    if not model.is_finite():
        raise NumericError("model parameters contain non-finite values")


def hidden_preactivations(model: AmplitudeModel, x) -> np.ndarray:
    """``W x + b`` for one configuration or a batch."""
    x = _as_configs(model, x)
    return x @ model.W.T + model.b


def _hidden_term(model: AmplitudeModel, theta) -> np.ndarray:
    if model.architecture == "RBM":
        return log2cosh(theta)
    return model.v * np.tanh(theta)


def log_amplitude(model: AmplitudeModel, x):
    """Complex ``log psi(x)``; ``x`` may be a single configuration or ``(N, n)``."""
    _check_finite(model)
    xf = _as_configs(model, x)
    theta = xf @ model.W.T + model.b
    val = xf @ model.c + _hidden_term(model, theta).sum(axis=-1)
    val = np.asarray(val, dtype=np.complex128)
    return complex(val) if val.ndim == 0 else val


def log_derivatives(model: AmplitudeModel, x) -> np.ndarray:
    """Per-configuration score ``O(x) = d log psi(x) / d theta`` in flat order."""
    _check_finite(model)
    xf = _as_configs(model, x)
    single = xf.ndim == 1
    xb = np.atleast_2d(xf)
    theta = xb @ model.W.T + model.b
    t = np.tanh(theta)
    if model.architecture == "RBM":
        hid = t
        blocks = [(hid[:, :, None] * xb[:, None, :]).reshape(len(xb), -1), hid]
    else:
        hid = model.v * (1.0 - t * t)
        blocks = [(hid[:, :, None] * xb[:, None, :]).reshape(len(xb), -1), hid, t]
    blocks.append(xb.astype(hid.dtype))
    out = np.concatenate(blocks, axis=1)
    return out[0] if single else out


def unnormalized_probability(model: AmplitudeModel, x):
    """``|psi(x)|^2 = exp(2 Re log psi(x))``."""
    _check_finite(model)
    xf = _as_configs(model, x)
    theta = xf @ model.W.T + model.b
    if model.architecture == "RBM":
        hid = log2cosh_real(theta)
    else:
        hid = (model.v * np.tanh(theta)).real
    re = (xf @ model.c).real + hid.sum(axis=-1)
    out = np.exp(2.0 * re)
    return float(out) if np.ndim(out) == 0 else out


# -- checkpoints -------------------------------------------------------------


def _pairs(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=np.complex128).ravel()
    return [[float(z.real), float(z.imag)] for z in a]


def _unpairs(rows, shape) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 2)
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(shape)


def model_to_dict(model: AmplitudeModel) -> dict:
    out = {
        "architecture": model.architecture,
        "field": model.field,
        "n": model.n,
        "m": model.m,
        "encoding": model.encoding,
        "W": _pairs(model.W),
        "b": _pairs(model.b),
        "c": _pairs(model.c),
    }
    if model.v is not None:
        out["v"] = _pairs(model.v)
    return out


def model_from_dict(data: dict) -> AmplitudeModel:
    n, m = int(data["n"]), int(data["m"])
    field = data["field"]

    def conv(key, shape):
        a = _unpairs(data[key], shape)
        return a.real if field == "real" else a

    return AmplitudeModel(
        architecture=data["architecture"],
        field=field,
        W=conv("W", (m, n)),
        b=conv("b", (m,)),
        c=conv("c", (n,)),
        v=conv("v", (m,)) if data.get("v") is not None else None,
        encoding=data.get("encoding", "pm1"),
    )


def save_model(model: AmplitudeModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> AmplitudeModel:
    return model_from_dict(json.loads(Path(path).read_text()))
