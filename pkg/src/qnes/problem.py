"""Max-Cut instances, the spin objective and exact/certified reference values.

Spins live in ``{+1, -1}``.  The objective to *minimise* is

    f(x) = sum_{{i,j} in E} (x_i x_j - 1) / 2

so that ``-f(x)`` counts the edges crossing the partition encoded by ``x``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidInstanceError, SizeLimitError

__all__ = [
    "MaxCutInstance",
    "CutResult",
    "generate_instance",
    "objective",
    "cut_values",
    "brute_force_optimum",
    "spectral_upper_bound",
    "validate_spins",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
    "parse_edge_list",
    "format_edge_list",
    "content_hash",
]

BRUTE_FORCE_MAX_N = 26
_U64 = 2**64


@dataclass(frozen=True)
class MaxCutInstance:
    """Undirected, unweighted graph on ``n`` nodes.

    Edges are stored as sorted ``(i, j)`` tuples with ``i < j``, themselves
    sorted lexicographically, so two instances with the same edge set compare
    equal.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    seed: int = 0
    density: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInstanceError(f"node count must be positive, got {self.n}")
        canon = []
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise InvalidInstanceError(f"self-loop on node {i}")
            if min(i, j) < 0 or max(i, j) >= self.n:
                raise InvalidInstanceError(f"edge ({i}, {j}) out of range for n={self.n}")
            canon.append((min(i, j), max(i, j)))
        canon.sort()
        for a, b in zip(canon, canon[1:]):
            if a == b:
                raise InvalidInstanceError(f"duplicate edge {a}")
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """``(|E|, 2)`` integer array of endpoints."""
        return np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        e = self.edge_array
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
        return a

    @cached_property
    def laplacian(self) -> np.ndarray:
        a = self.adjacency
        return np.diag(a.sum(axis=1)) - a


@dataclass(frozen=True)
class CutResult:
    f_value: int
    cut_value: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "cut_value", -int(self.f_value))


def _pair_from_colex(k: np.ndarray):
    # k = j(j-1)/2 + i with 0 <= i < j; invert with an integer sqrt.
    j = ((1 + np.sqrt(1 + 8 * k.astype(np.float64))) // 2).astype(np.int64)
    j = np.where(j * (j - 1) // 2 > k, j - 1, j)
    j = np.where((j + 1) * j // 2 <= k, j + 1, j)
    i = k - j * (j - 1) // 2
    return i, j


def generate_instance(n: int, density: float, seed: int) -> MaxCutInstance:
    """Erdos-Renyi ``G(n, density)`` keyed by ``seed``.

    Pair ``{i, j}`` (``i < j``) has colex index ``j(j-1)/2 + i`` and is kept
    when the Philox stream keyed by ``seed`` yields a uniform below
    ``density`` at that counter position.  Membership of a pair therefore
    depends only on ``(seed, pair)``; an instance on ``n`` nodes is the
    induced subgraph of the one on ``n + 1`` nodes with the same seed.
    """
    if n < 2:
        raise InvalidInstanceError(f"need at least 2 nodes, got n={n}")
    if not 0.0 <= density <= 1.0:
        raise InvalidInstanceError(f"density must lie in [0, 1], got {density}")
    n_pairs = comb(n, 2)
    bitgen = np.random.Philox(key=int(seed) % _U64)
    u = np.random.Generator(bitgen).random(n_pairs)
    kept = np.flatnonzero(u < density)
    i, j = _pair_from_colex(kept)
    edges = tuple(zip(i.tolist(), j.tolist()))
    return MaxCutInstance(n=n, edges=edges, seed=int(seed), density=float(density))


def validate_spins(x, n: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    if n is not None and x.shape[-1] != n:
        raise DimensionError(f"configuration length {x.shape[-1]} does not match n={n}")
    if not np.all((x == 1) | (x == -1)):
        raise DimensionError("spin entries must be exactly +1 or -1")
    return x


def cut_values(instance: MaxCutInstance, configs) -> np.ndarray:
    """Cut sizes for one configuration or a batch of shape ``(N, n)``."""
    x = np.asarray(configs)
    if x.shape[-1] != instance.n:
        raise DimensionError(
            f"configuration length {x.shape[-1]} does not match n={instance.n}"
        )
    e = instance.edge_array
    if len(e) == 0:
        return np.zeros(x.shape[:-1], dtype=np.int64)
    prod = x[..., e[:, 0]] * x[..., e[:, 1]]
    return ((len(e) - prod.sum(axis=-1).astype(np.int64)) // 2).astype(np.int64)


def objective(instance: MaxCutInstance, x) -> CutResult:
    x = validate_spins(x, instance.n)
    if x.ndim != 1:
        raise DimensionError("objective takes a single configuration; use cut_values for batches")
    return CutResult(f_value=-int(cut_values(instance, x)))


def _all_spins(k: int) -> np.ndarray:
    """All ``2**k`` spin vectors; row ``r`` maps bit ``b`` of ``r`` (MSB first) to ``1 - 2b``."""
    if k == 0:
        return np.ones((1, 0))
    idx = np.arange(2**k)[:, None]
    bits = (idx >> np.arange(k - 1, -1, -1)) & 1
    return 1.0 - 2.0 * bits


def brute_force_optimum(instance: MaxCutInstance) -> tuple[int, int]:
    """Exact maximum cut and the number of configurations attaining it.

    Both members of every global-flip pair are counted.  The node set is
    split in two halves so that the cross-term over all ``2**n`` states is a
    single matrix product per chunk.
    """
    n = instance.n
    if n > BRUTE_FORCE_MAX_N:
        raise SizeLimitError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got n={n}")
    if instance.n_edges == 0:
        return 0, 2**n
    n_lo = n // 2
    a = instance.adjacency
    lo = _all_spins(n_lo)
    hi = _all_spins(n - n_lo)
    a_lo = a[:n_lo, :n_lo]
    a_hi = a[n_lo:, n_lo:]
    cross = a[:n_lo, n_lo:]
    # x^T A x / 2 split into lo-lo, hi-hi and lo-hi contributions.
    q_lo = 0.5 * np.einsum("ri,ij,rj->r", lo, a_lo, lo)
    q_hi = 0.5 * np.einsum("ri,ij,rj->r", hi, a_hi, hi)
    lo_b = lo @ cross
    n_e = instance.n_edges
    best, count = -1, 0
    chunk = max(1, 2**22 // max(len(lo), 1))
    for start in range(0, len(hi), chunk):
        h = hi[start : start + chunk]
        s = q_lo[:, None] + q_hi[None, start : start + chunk] + lo_b @ h.T
        cuts = np.rint((n_e - s) / 2).astype(np.int64)
        m = int(cuts.max())
        if m > best:
            best, count = m, int(np.count_nonzero(cuts == m))
        elif m == best:
            count += int(np.count_nonzero(cuts == m))
    return best, count


def spectral_upper_bound(instance: MaxCutInstance, rtol: float = 1e-9, max_iter: int = 200_000) -> float:
    """Certified bound ``(n/4) * lambda_max(L)`` on the maximum cut.

    ``lambda_max`` comes from power iteration on the (PSD) Laplacian, run until
    the eigen-residual ``|Lv - mu v|`` falls below ``rtol * mu``.  The residual
    is added to the Rayleigh quotient ``mu`` so the returned value sits on the
    safe side of the eigenvalue it converged to.
    """
    n = instance.n
    if n < 2:
        raise InvalidInstanceError("spectral bound needs n >= 2")
    if instance.n_edges == 0:
        return 0.0
    lap = instance.laplacian
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = lap @ v
        mu = float(v @ w)
        resid = float(np.linalg.norm(w - mu * v))
        if resid <= rtol * mu:
            break
        v = w / np.linalg.norm(w)
    return n / 4.0 * (mu + resid)


# -- serialization -----------------------------------------------------------


def instance_to_dict(instance: MaxCutInstance) -> dict:
    return {
        "n": instance.n,
        "seed": instance.seed,
        "density": instance.density,
        "edges": [list(e) for e in instance.edges],
    }


def instance_from_dict(data: dict) -> MaxCutInstance:
    try:
        return MaxCutInstance(
            n=int(data["n"]),
            edges=tuple(tuple(e) for e in data["edges"]),
            seed=int(data.get("seed", 0)),
            density=None if data.get("density") is None else float(data["density"]),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInstanceError(f"malformed instance record: {exc}") from exc


def format_edge_list(instance: MaxCutInstance) -> str:
    lines = [f"{instance.n} {instance.n_edges}"]
    lines += [f"{i} {j}" for i, j in instance.edges]
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> MaxCutInstance:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise InvalidInstanceError("empty edge list")
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
        edges = tuple((int(r[0]), int(r[1])) for r in rows[1:])
    except (ValueError, IndexError) as exc:
        raise InvalidInstanceError(f"malformed edge list: {exc}") from exc
    if len(edges) != m:
        raise InvalidInstanceError(f"header announces {m} edges, found {len(edges)}")
    return MaxCutInstance(n=n, edges=edges)


def save_instance(instance: MaxCutInstance, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "edgelist")
    if fmt == "json":
        path.write_text(json.dumps(instance_to_dict(instance)) + "\n")
    else:
        path.write_text(format_edge_list(instance))


def load_instance(path) -> MaxCutInstance:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return instance_from_dict(json.loads(text))
    return parse_edge_list(text)


def content_hash(instance: MaxCutInstance) -> str:
    """Git blob hash (sha1) of the canonical JSON serialization."""
    payload = json.dumps(instance_to_dict(instance), sort_keys=True).encode()
    header = f"blob {len(payload)}\0".encode()
    return hashlib.sha1(header + payload).hexdigest()
