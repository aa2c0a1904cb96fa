"""Hermite functions, the smooth cutoff and multi-index bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .exceptions import DomainError

PI_QUARTER = math.pi ** -0.25

# rescale the recurrence pair once it leaves [2^-RESCALE_BITS, 2^RESCALE_BITS]
_RESCALE_BITS = 300
_BIG = 2.0 ** _RESCALE_BITS
_LOG_BIG = _RESCALE_BITS * math.log(2.0)


def hermite_functions(m_max, x):
    """Orthonormal Hermite functions of degree 0..m_max.

    Parameters
    ----------
    m_max : int
        Highest degree, ``m_max >= 0``.
    x : array_like
        Evaluation points, any shape.

    Returns
    -------
    ndarray of shape ``(m_max + 1,) + np.shape(x)``
        ``out[j]`` holds psi_j(x).

    Notes
    -----
    The three-term recurrence runs on the polynomial part with a running
    power-of-two scale, and the Gaussian factor is applied at the end. This
    keeps values finite far in the tails where exp(-x^2/2) alone underflows.
    """
    m_max = int(m_max)
    if m_max < 0:
        raise DomainError(f"m_max must be non-negative, got {m_max}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Hermite functions need finite arguments")
    out = np.empty((m_max + 1,) + x.shape)
    half_sq = 0.5 * x * x
    prev = np.zeros_like(x)
    cur = np.full_like(x, PI_QUARTER)
    logscale = np.zeros_like(x)
    out[0] = cur * np.exp(-half_sq)
    for j in range(1, m_max + 1):
        nxt = math.sqrt(2.0 / j) * x * cur - math.sqrt((j - 1) / j) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _BIG
        if big.any():
            prev = np.where(big, prev / _BIG, prev)
            cur = np.where(big, cur / _BIG, cur)
            logscale = logscale + big * _LOG_BIG
        out[j] = cur * np.exp(logscale - half_sq)
    return out


def hermite_1d_all(m_max, x):
    """Values psi_0(x), ..., psi_{m_max}(x) at a single real x."""
    if not np.isscalar(x) and np.ndim(x) != 0:
        raise DomainError("hermite_1d_all expects a scalar x")
    return hermite_functions(m_max, float(x))


def hermite_multi(k, x):
    """Tensor-product Hermite function psi_k(x) = prod_i psi_{k_i}(x_i).

    Parameters
    ----------
    k : MultiIndex or sequence of int
    x : sequence of float
        Same length as ``k``.
    """
    entries = k.entries if isinstance(k, MultiIndex) else tuple(int(v) for v in k)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size != len(entries):
        raise DomainError(
            f"dimension mismatch: index has {len(entries)} entries, point has {x.size}")
    val = 1.0
    for ki, xi in zip(entries, x):
        if ki < 0:
            raise DomainError("multi-index entries must be non-negative")
        val *= hermite_functions(ki, xi)[ki]
    return float(val)


def _g_exp(u):
    pos = u > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, u, 1.0)), 0.0)


def _g_exp2(u):
    pos = u > 0
    safe = np.where(pos, u, 1.0)
    return np.where(pos, np.exp(-1.0 / (safe * safe)), 0.0)


_BUMPS = {"exp": _g_exp, "exp2": _g_exp2}


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth non-increasing cutoff with plateaus 1 below ``transition_lo``
    and 0 above ``transition_hi``.

    ``shape`` picks the bump g in g(1-s) / (g(s) + g(1-s)), with s the
    position rescaled to [0, 1] across the transition: ``"exp"`` uses
    exp(-1/u) and ``"exp2"`` uses exp(-1/u^2). Both give H = 1/2 at the
    midpoint.
    """

    transition_lo: float = 0.5
    transition_hi: float = 1.0
    shape: str = "exp"

    def __post_init__(self):
        if self.shape not in _BUMPS:
            raise DomainError(f"unknown cutoff shape {self.shape!r}; pick one of {sorted(_BUMPS)}")
        if not 0 <= self.transition_lo < self.transition_hi:
            raise DomainError("need 0 <= transition_lo < transition_hi")

    def __call__(self, t):
        return cutoff_H(self, t)

    def to_dict(self):
        return {"transition_lo": self.transition_lo, "transition_hi": self.transition_hi,
                "shape": self.shape}


def cutoff_H(spec, t):
    """Evaluate the cutoff at non-negative ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(t_arr)) or np.any(t_arr < 0):
        raise DomainError("cutoff argument must be non-negative")
    g = _BUMPS[spec.shape]
    s = (t_arr - spec.transition_lo) / (spec.transition_hi - spec.transition_lo)
    s_in = np.clip(s, 0.0, 1.0)
    a, b = g(1.0 - s_in), g(s_in)
    mid = a / np.where(a + b > 0, a + b, 1.0)
    out = np.where(s <= 0, 1.0, np.where(s >= 1, 0.0, mid))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MultiIndex:
    """Vector of non-negative integers."""

    entries: tuple

    def __post_init__(self):
        ent = tuple(int(v) for v in self.entries)
        if any(v < 0 for v in ent):
            raise DomainError("multi-index entries must be non-negative")
        object.__setattr__(self, "entries", ent)

    @property
    def q(self):
        return len(self.entries)

    @property
    def one_norm(self):
        return sum(self.entries)

    @property
    def inf_norm(self):
        return max(self.entries) if self.entries else 0


@lru_cache(maxsize=64)
def _total_degree_indices(q, max_degree):
    rows = []
    for m in range(max_degree + 1):
        # stars and bars, then sort the layer lexicographically
        layer = []
        for bars in combinations(range(m + q - 1), q - 1):
            prev, parts = -1, []
            for b in bars:
                parts.append(b - prev - 1)
                prev = b
            parts.append(m + q - 2 - prev)
            layer.append(tuple(parts))
        rows.extend(sorted(layer))
    arr = np.array(rows, dtype=np.int64).reshape(-1, q)
    arr.setflags(write=False)
    return arr


def total_degree_indices(q, max_degree):
    """All multi-indices k in Z_+^q with |k|_1 <= max_degree.

    Rows are ordered by total degree, then lexicographically.
    """
    q, max_degree = int(q), int(max_degree)
    if q < 1:
        raise DomainError("q must be at least 1")
    if max_degree < 0:
        return np.zeros((0, q), dtype=np.int64)
    return _total_degree_indices(q, max_degree)


def multi_hermite_basis(indices, x, scale=1.0):
    """Evaluate psi_k(scale * x) for every row k of ``indices``.

    Parameters
    ----------
    indices : ndarray of shape (K, q)
    x : ndarray of shape (m, q)
    scale : float

    Returns
    -------
    ndarray of shape (K, m)
    """
    x = np.asarray(x, dtype=float)
    indices = np.asarray(indices)
    if x.ndim != 2 or x.shape[1] != indices.shape[1]:
        raise DomainError("point array must have shape (m, q) matching the indices")
    deg = int(indices.max()) if indices.size else 0
    out = np.ones((indices.shape[0], x.shape[0]))
    for i in range(x.shape[1]):
        table = hermite_functions(deg, scale * x[:, i])
        out *= table[indices[:, i]]
    return out
