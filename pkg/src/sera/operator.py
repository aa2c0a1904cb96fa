"""Evaluation grids and the discrete recovery operator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import ConfigurationError, DomainError
from .hermite import hermite_functions, multi_hermite_basis
from .kernels import (SQRT3, STAR_SCALE, KernelSpec, basis_indices, check_reference_grid,
                      layer_weights, make_reference_grid, star_layer_weights)
from .quadrature import A_SERO, default_budget

MAX_DENSE_BYTES = 1.0e9
_LETTERS = "abcdefghijklmnop"


@dataclass(frozen=True)
class EvaluationGrid:
    """Tensor lattice over [-3 sqrt(3) level / 2, 3 sqrt(3) level / 2]^q.

    ``axis`` holds the 1D nodes; ``points`` enumerates the lattice in
    row-major order with the first coordinate varying slowest.
    """

    level: float
    q: int
    spacing: float
    axis: np.ndarray

    @property
    def half_side(self):
        return 1.5 * SQRT3 * self.level

    @property
    def shape(self):
        return (self.axis.size,) * self.q

    @property
    def size(self):
        return self.axis.size ** self.q

    @cached_property
    def points(self):
        grids = np.meshgrid(*([self.axis] * self.q), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        pts.setflags(write=False)
        return pts

    def to_dict(self):
        return {"level": self.level, "q": self.q, "spacing": self.spacing,
                "nodes_per_axis": int(self.axis.size)}


def default_spacing(level, alpha=None):
    """min(alpha / (2 level), 0.5 / level); alpha defaults to 1."""
    alpha = 1.0 if alpha is None else alpha
    return min(alpha / (2.0 * level), 0.5 / level)


def build_grid(level, q, spacing):
    """Origin-anchored lattice covering the box of the given level.

    The node spacing is the largest value not above ``spacing`` that
    divides the half side, so both corners and the origin are nodes and
    each axis has ``2 * ceil(half / spacing) + 1`` nodes.
    """
    if level <= 0 or spacing <= 0:
        raise DomainError("level and spacing must be positive")
    if int(q) != q or q < 1:
        raise DomainError("q must be a positive integer")
    half = 1.5 * SQRT3 * level
    if spacing > 2 * half * (1 + 1e-12):
        raise DomainError(f"spacing {spacing:.6g} exceeds the box side {2 * half:.6g}")
    m = max(1, math.ceil(half / spacing - 1e-9))
    axis = np.arange(-m, m + 1) * (half / m)
    axis[m] = 0.0
    axis.setflags(write=False)
    return EvaluationGrid(float(level), int(q), half / m, axis)


def _sample_coefficients(per_axis, v):
    """c[f, j_1, ..., j_q] = sum_y v[f, y] prod_i per_axis[i][j_i, y]."""
    q = len(per_axis)
    sub = "z" + "y," + ",".join(f"{_LETTERS[i]}y" for i in range(q)) + "->z" + _LETTERS[:q]
    return np.einsum(sub, v, *per_axis, optimize=True)


def _synthesize(coef, grid_axis_basis):
    """field[f, x_1..x_q] = sum_J coef[f, J] prod_i basis[j_i, x_i]."""
    out = coef
    for _ in range(coef.ndim - 1):
        # contract the leading degree axis, append the grid axis at the end
        out = np.tensordot(out, grid_axis_basis, axes=([1], [0]))
    return out


def layer_tensor(spec):
    """lambda_{|J|_1} on the full (D,)*q index cube, zero where |J|_1 >= D."""
    D = spec.degree_cap
    lam = star_layer_weights(spec)
    total = np.zeros((D,) * spec.q, dtype=np.int64)
    for i in range(spec.q):
        shape = [1] * spec.q
        shape[i] = D
        total = total + np.arange(D).reshape(shape)
    out = np.zeros(total.shape)
    inside = total < D
    out[inside] = lam[total[inside]]
    return out


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Discrete recovery operator in separable factored form.

    Entry (x, y) equals ``w_y * Phi_n^*(x, y) * exp(-|y|^2/3)``. The operator
    is stored as per-axis Hermite tables of the grid and of the scaled
    sample points plus the layer weights, which applies in
    O(q * D * (m + g)) per frame instead of O(g^q * m). ``toarray`` builds
    the dense matrix when it is needed explicitly.
    """

    grid: EvaluationGrid
    sample_points: np.ndarray
    weights: np.ndarray
    spec: KernelSpec

    @property
    def level(self):
        return self.spec.n

    @property
    def shape(self):
        return (self.grid.size, self.sample_points.shape[0])

    @cached_property
    def sample_factor(self):
        """w_y * exp(-|y|^2 / 3)."""
        return self.weights * np.exp(-(self.sample_points ** 2).sum(1) / 3.0)

    @cached_property
    def sample_tables(self):
        D = self.spec.degree_cap
        return [hermite_functions(D - 1, STAR_SCALE * self.sample_points[:, i])
                for i in range(self.spec.q)]

    @cached_property
    def grid_table(self):
        return hermite_functions(self.spec.degree_cap - 1, self.grid.axis)

    @cached_property
    def layers(self):
        return layer_tensor(self.spec)

    def coefficients(self, data):
        """Hermite coefficients lambda_J c_J of the field for each frame."""
        data = np.asarray(data, dtype=float)
        frames = np.atleast_2d(data)
        if frames.shape[-1] != self.shape[1]:
            raise DomainError(f"data has {frames.shape[-1]} values, expected {self.shape[1]}")
        c = _sample_coefficients(self.sample_tables, frames * self.sample_factor)
        return c * self.layers

    def apply(self, data):
        """Field values on the grid; ``data`` of shape (m,) or (frames, m)."""
        data = np.asarray(data, dtype=float)
        coef = self.coefficients(data)
        field = _synthesize(coef, self.grid_table).reshape(coef.shape[0], -1)
        return field[0] if data.ndim == 1 else field

    def evaluate(self, data, x):
        """Field at arbitrary points ``x`` of shape (p, q)."""
        x = np.asarray(x, dtype=float).reshape(-1, self.spec.q)
        data = np.asarray(data, dtype=float)
        coef = self.coefficients(data)
        D = self.spec.degree_cap
        tables = [hermite_functions(D - 1, x[:, i]) for i in range(self.spec.q)]
        q = self.spec.q
        sub = ("z" + _LETTERS[:q] + "," + ",".join(f"{_LETTERS[i]}p" for i in range(q)) + "->zp")
        out = np.einsum(sub, coef, *tables, optimize=True)
        return out[0] if data.ndim == 1 else out

    def rounding_floor(self, data):
        """Rough size of the field error caused by double-precision rounding.

        eps * pi^{-q/2} * ||lambda||_2 * sum_y |w_y g_y exp(-|y|^2/3)|, with
        lambda the layer weights over all multi-indices. The Phi_n^* weights
        grow like 3^{m/2}, which is what makes high levels unreachable.
        """
        frames = np.atleast_2d(np.asarray(data, dtype=float))
        worst = max(log_rounding_floor(self.spec, self.sample_factor, f) for f in frames)
        return math.exp(worst) if worst < 709 else math.inf

    def toarray(self, max_bytes=MAX_DENSE_BYTES):
        """Dense (grid x samples) matrix."""
        need = self.shape[0] * self.shape[1] * 8
        if need > max_bytes:
            raise ConfigurationError(f"dense operator would need {need / 1e9:.2f} GB")
        idx = basis_indices(self.spec)
        lam = star_layer_weights(self.spec)[idx.sum(1)]
        PX = multi_hermite_basis(idx, self.grid.points)
        PY = multi_hermite_basis(idx, self.sample_points, scale=STAR_SCALE)
        return ((PX * lam[:, None]).T @ PY) * self.sample_factor


def log_layer_norm(spec):
    """Natural log of the Euclidean norm of the Phi_n^* layer weights over all
    multi-indices. Computed in log space since 3^{m/2} overflows for large n.
    """
    m = np.arange(spec.degree_cap)
    h = layer_weights(spec)
    keep = h > 0
    m, h = m[keep], h[keep]
    log_lam = 0.5 * spec.q * math.log(2.0 / (spec.n ** 2 * math.pi)) + np.log(h) + 0.5 * m * math.log(3.0)
    log_terms = 2 * log_lam + gammaln(m + spec.q) - gammaln(m + 1.0) - gammaln(spec.q)
    return 0.5 * float(logsumexp(log_terms))


def log_rounding_floor(spec, sample_factor, data):
    """Natural log of eps * pi^{-q/2} * ||lambda||_2 * sum_y |w_y g_y exp(-|y|^2/3)|."""
    l1 = float(np.abs(np.asarray(data, dtype=float) * sample_factor).sum())
    if l1 == 0:
        return -math.inf
    return (math.log(np.finfo(float).eps) - 0.5 * spec.q * math.log(math.pi)
            + log_layer_norm(spec) + math.log(l1))


def required_budget(n):
    return default_budget(n)


def assemble_operator(qm, grid, spec):
    """Operator of level ``spec.n`` on ``grid`` from quadrature measure ``qm``.

    Raises
    ------
    DomainError
        Dimension mismatch or A different from 2/sqrt(3).
    ConfigurationError
        Quadrature degree budget below 2 n^2.
    """
    if qm.q != grid.q or qm.q != spec.q:
        raise DomainError(f"dimension mismatch: samples q={qm.q}, grid q={grid.q}, kernel q={spec.q}")
    if abs(qm.A - A_SERO) > 1e-12:
        raise DomainError(f"the operator needs A = 2/sqrt(3), got {qm.A}")
    need = required_budget(spec.n)
    if qm.degree_budget < need:
        raise ConfigurationError(
            f"quadrature degree budget {qm.degree_budget} is below 2n^2 = {need} for level {spec.n:g}")
    return OperatorMatrix(grid, qm.points, qm.weights, spec)


@dataclass(frozen=True)
class FieldValues:
    """Operator output on a grid."""

    grid: EvaluationGrid
    values: np.ndarray
    level: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size != self.grid.size:
            raise DomainError(f"{vals.size} values for a grid of {self.grid.size} points")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def points(self):
        return self.grid.points


def apply(matrix, data):
    """FieldValues of ``matrix`` applied to the sample vector ``data``."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 1:
        raise DomainError("apply takes a single data vector; use OperatorMatrix.apply for frames")
    return FieldValues(matrix.grid, matrix.apply(data), matrix.level)


def _trapezoid_weights(u):
    h = np.diff(u)
    w = np.zeros(u.size)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def continuous_sero_oracle(spec, f, x, reference_grid=None):
    """Trapezoid approximation of the integral of f(u) Phi_n^*(x, u) exp(-|u|^2/3).

    Parameters
    ----------
    spec : KernelSpec
    f : callable
        Vectorized: maps an (m, q) array to m values.
    x : array_like
        One point of length q or an array of shape (p, q).
    reference_grid : ndarray, optional
        Uniform 1D grid with spacing at most 0.05; the integral runs over
        its q-fold product.

    Returns
    -------
    float or ndarray
    """
    if reference_grid is None:
        reference_grid = make_reference_grid(spec)
    u = check_reference_grid(spec, reference_grid)
    q = spec.q
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and x.size == q)
    x = x.reshape(-1, q)
    grids = np.meshgrid(*([u] * q), indexing="ij")
    fu = np.asarray(f(np.stack([g.ravel() for g in grids], axis=1)), dtype=float)
    fu = fu.reshape((u.size,) * q)
    D = spec.degree_cap
    tw = _trapezoid_weights(u) * np.exp(-u * u / 3.0)
    tab = hermite_functions(D - 1, STAR_SCALE * u) * tw
    coef = fu[None]
    for _ in range(q):
        coef = np.tensordot(coef, tab, axes=([1], [1]))
    coef = coef * layer_tensor(spec)
    tables = [hermite_functions(D - 1, x[:, i]) for i in range(q)]
    sub = "z" + _LETTERS[:q] + "," + ",".join(f"{_LETTERS[i]}p" for i in range(q)) + "->zp"
    out = np.einsum(sub, coef, *tables, optimize=True)[0]
    return float(out[0]) if single else out
