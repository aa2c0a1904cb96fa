"""Localized Hermite kernels and their Mehler-formula oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .hermite import CutoffSpec, hermite_functions, multi_hermite_basis, total_degree_indices

SQRT3 = math.sqrt(3.0)
STAR_SCALE = 2.0 / SQRT3


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the kernels Phi_n and Phi_n^*.

    Parameters
    ----------
    n : float
        Resolution parameter, positive.
    q : int
        Dimension.
    S : int, optional
        Localization exponent, defaults to ``q + 2``. Must exceed ``q``.
    cutoff : CutoffSpec
    """

    n: float
    q: int = 1
    S: int = None
    cutoff: CutoffSpec = field(default_factory=CutoffSpec)

    def __post_init__(self):
        if not (np.isfinite(self.n) and self.n > 0):
            raise DomainError(f"n must be positive, got {self.n}")
        if int(self.q) != self.q or self.q < 1:
            raise DomainError(f"q must be a positive integer, got {self.q}")
        object.__setattr__(self, "n", float(self.n))
        object.__setattr__(self, "q", int(self.q))
        if self.S is None:
            object.__setattr__(self, "S", self.q + 2)
        if int(self.S) != self.S or self.S <= self.q:
            raise DomainError(f"S must be an integer larger than q={self.q}, got {self.S}")
        object.__setattr__(self, "S", int(self.S))

    @property
    def degree_cap(self):
        """Number of total-degree layers, ceil(n^2); sums run over |j|_1 < n^2."""
        return max(1, math.ceil(self.n * self.n - 1e-12))

    @property
    def half_side(self):
        """Half side of the working box, 3*sqrt(3)*n/2."""
        return 1.5 * SQRT3 * self.n

    def with_n(self, n):
        return KernelSpec(n=n, q=self.q, S=self.S, cutoff=self.cutoff)

    def to_dict(self):
        return {"n": self.n, "q": self.q, "S": self.S, "cutoff": self.cutoff.to_dict()}


def layer_weights(spec):
    """H(sqrt(m)/n) for m = 0 .. degree_cap - 1."""
    m = np.arange(spec.degree_cap)
    return np.asarray(spec.cutoff(np.sqrt(m) / spec.n), dtype=float)


def star_layer_weights(spec):
    """Layer weights of Phi_n^* including its prefactor."""
    m = np.arange(spec.degree_cap)
    pref = (2.0 / (spec.n ** 2 * math.pi)) ** (spec.q / 2)
    return pref * layer_weights(spec) * 3.0 ** (m / 2)


def _as_points(spec, x, name):
    x = np.asarray(x, dtype=float)
    if spec.q == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != spec.q:
        raise DomainError(f"{name} has trailing dimension {x.shape[-1]}, expected q={spec.q}")
    return x


def _layers(per_coord, D):
    """Total-degree layers from per-coordinate degree sequences.

    ``per_coord`` is a list of arrays of shape (D, ...); the result is their
    q-fold discrete convolution truncated to degrees < D.
    """
    P = per_coord[0]
    for p in per_coord[1:]:
        nxt = np.empty_like(P)
        for m in range(D):
            nxt[m] = np.einsum("a...,a...->...", P[: m + 1], p[m::-1])
        P = nxt
    return P


def _layered(spec, x, y, yscale, weights):
    x = _as_points(spec, x, "x")
    y = _as_points(spec, y, "y")
    x, y = np.broadcast_arrays(x, y)
    D = spec.degree_cap
    per = [hermite_functions(D - 1, x[..., i]) * hermite_functions(D - 1, yscale * y[..., i])
           for i in range(spec.q)]
    val = np.tensordot(weights, _layers(per, D), axes=(0, 0))
    return float(val) if np.ndim(val) == 0 else val


def phi_n(spec, x, y):
    """Localized kernel Phi_n(x, y) by the total-degree layered scheme.

    Parameters
    ----------
    spec : KernelSpec
    x, y : array_like
        Points with trailing dimension q (for q = 1 plain scalars or arrays
        also work). Leading shapes broadcast.

    Returns
    -------
    float or ndarray
    """
    return _layered(spec, x, y, 1.0, layer_weights(spec) / spec.n ** spec.q)


def phi_n_star(spec, x, y):
    """Companion kernel Phi_n^*(x, y); the second argument is scaled by 2/sqrt(3)."""
    return _layered(spec, x, y, STAR_SCALE, star_layer_weights(spec))


def phi_diag(spec, x):
    """Phi_n(x, x)."""
    return phi_n(spec, x, x)


def basis_indices(spec):
    """Multi-indices with |j|_1 < degree_cap, ordered by degree then lexicographically."""
    return total_degree_indices(spec.q, spec.degree_cap - 1)


def kernel_matrix(spec, X, Y, star=False):
    """Dense matrix of Phi_n (or Phi_n^*) over all pairs of rows of X and Y.

    Parameters
    ----------
    X : ndarray of shape (mx, q)
    Y : ndarray of shape (my, q)
    star : bool
        Evaluate Phi_n^* instead of Phi_n.

    Returns
    -------
    ndarray of shape (mx, my)
    """
    X = np.asarray(X, dtype=float).reshape(-1, spec.q)
    Y = np.asarray(Y, dtype=float).reshape(-1, spec.q)
    idx = basis_indices(spec)
    deg = idx.sum(axis=1)
    if star:
        w = star_layer_weights(spec)[deg]
        yscale = STAR_SCALE
    else:
        w = layer_weights(spec)[deg] / spec.n ** spec.q
        yscale = 1.0
    keep = w != 0
    idx, w = idx[keep], w[keep]
    PX = multi_hermite_basis(idx, X)
    PY = multi_hermite_basis(idx, Y, scale=yscale)
    return (PX * w[:, None]).T @ PY


def mehler_closed_form(q, r, y, z):
    """Closed form of sum_j psi_j(y) psi_j(z) r^{|j|_1} for |r| < 1."""
    if not abs(r) < 1:
        raise DomainError(f"Mehler formula needs |r| < 1, got {r}")
    y, z = _pair(q, y, z)
    yy, zz, yz = np.sum(y * y), np.sum(z * z), np.sum(y * z)
    s = 1.0 - r * r
    return float((math.pi * s) ** (-q / 2)
                 * math.exp((2 * yz * r - (yy + zz) * r * r) / s)
                 * math.exp(-(yy + zz) / 2))


def mehler_special(q, y, z):
    """Mehler sum at r = 1/sqrt(3) in completed-square form."""
    y, z = _pair(q, y, z)
    d = y - 0.5 * SQRT3 * z
    return float((3.0 / (2 * math.pi)) ** (q / 2) * math.exp(-np.sum(d * d))
                 * math.exp(-np.sum(z * z) / 4))


def mehler_series(q, r, y, z, max_degree=60):
    """Truncated series sum_{|j|_1 <= max_degree} psi_j(y) psi_j(z) r^{|j|_1}."""
    y, z = _pair(q, y, z)
    D = max_degree + 1
    per = [hermite_functions(max_degree, y[i]) * hermite_functions(max_degree, z[i])
           for i in range(q)]
    P = _layers(per, D)
    return float(np.dot(r ** np.arange(D), P))


def _pair(q, y, z):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if y.shape != (q,) or z.shape != (q,):
        raise DomainError(f"expected two vectors of length q={q}, got {y.shape} and {z.shape}")
    return y, z


def make_reference_grid(spec, spacing=0.02):
    """Uniform 1D grid covering [-(3*sqrt(3)*n/2 + 10), +(...)] for oracle integrals."""
    half = spec.half_side + 10.0
    m = math.ceil(half / spacing)
    return np.arange(-m, m + 1) * spacing


def check_reference_grid(spec, grid, max_spacing=0.05):
    """Validate a 1D reference grid; returns it as a float array."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ConfigurationError("reference grid must be a 1D array with at least 3 nodes")
    steps = np.diff(grid)
    if np.any(steps <= 0):
        raise ConfigurationError("reference grid must be strictly increasing")
    if steps.max() > max_spacing * (1 + 1e-12):
        raise ConfigurationError(
            f"reference grid spacing {steps.max():.3g} exceeds {max_spacing}")
    half = spec.half_side + 10.0
    tol = steps.max()
    if grid[0] > -half + tol or grid[-1] < half - tol:
        raise ConfigurationError(f"reference grid must cover [-{half:.4g}, {half:.4g}]")
    return grid


def gauss_identity_residual(spec, x, y, reference_grid=None):
    """|Phi_n(x,y) - integral of exp(-|y-u|^2) Phi_n^*(x,u) exp(-|u|^2/3) du|.

    The integral factorizes over coordinates for each multi-index, so only
    one-dimensional trapezoid sums on ``reference_grid`` are needed.

    Parameters
    ----------
    spec : KernelSpec
    x, y : array_like of length q
    reference_grid : ndarray, optional
        Uniform 1D grid; defaults to spacing 0.02 over the required range.
    """
    if reference_grid is None:
        reference_grid = make_reference_grid(spec)
    u = check_reference_grid(spec, reference_grid)
    x = _as_points(spec, x, "x").reshape(spec.q)
    y = _as_points(spec, y, "y").reshape(spec.q)
    D = spec.degree_cap
    psi_u = hermite_functions(D - 1, STAR_SCALE * u)
    per = []
    for i in range(spec.q):
        gauss = np.exp(-(y[i] - u) ** 2 - u * u / 3.0)
        T = np.trapezoid(psi_u * gauss, u, axis=1)
        per.append(hermite_functions(D - 1, x[i]) * T)
    integral = float(np.dot(star_layer_weights(spec), _layers(per, D)))
    return abs(phi_n(spec, x, y) - integral)
