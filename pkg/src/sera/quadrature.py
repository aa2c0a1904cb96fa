"""Scattered-point quadrature weights with Hermite moment constraints."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree
from scipy.special import gammaln

from .exceptions import ConfigurationError, DomainError
from .hermite import multi_hermite_basis, total_degree_indices

A_SERO = 2.0 / math.sqrt(3.0)
BETA_DEFAULT = 0.25
MAX_MATRIX_BYTES = 1.0e9
MAX_PROBES = 2_000_000
MODES = ("moment-exact", "single-moment")


class MeshWarning(UserWarning):
    """Sample set is coarser than the recommended fill distance."""


def box_half_side(A, n):
    """Half side 3n/A of the sampling box."""
    return 3.0 * n / A


@dataclass(frozen=True)
class SampleSet:
    """Scattered sample points inside the box [-3n/A, 3n/A]^q.

    Parameters
    ----------
    points : ndarray of shape (m, q)
    A, n : float
        Box parameters.
    """

    points: np.ndarray
    A: float = A_SERO
    n: float = 1.0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DomainError("sample set needs a non-empty (m, q) array")
        if not np.all(np.isfinite(pts)):
            raise DomainError("sample points must be finite")
        if self.A <= 0 or self.n <= 0:
            raise DomainError("A and n must be positive")
        half = box_half_side(self.A, self.n)
        bad = np.abs(pts).max(axis=1) > half * (1 + 1e-12)
        if bad.any():
            raise DomainError(
                f"{int(bad.sum())} points lie outside the box of half side {half:.6g}, "
                f"first at row {int(np.argmax(bad))}")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise DomainError("sample points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def q(self):
        return self.points.shape[1]

    @property
    def half_side(self):
        return box_half_side(self.A, self.n)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class MeshStats:
    """Fill distance ``mesh_norm`` and minimal separation, both in the sup-norm.

    ``mesh_norm`` is an upper bound: the largest probe distance plus half
    the probe spacing.
    """

    mesh_norm: float
    separation: float
    probe_spacing: float

    def to_dict(self):
        return {"mesh_norm": self.mesh_norm, "separation": self.separation,
                "probe_spacing": self.probe_spacing}


def _lattice(half, spacing):
    m = max(1, math.ceil(half / spacing - 1e-12))
    return np.arange(-m, m + 1) * (half / m)


def mesh_stats(samples, probe_spacing=None):
    """Fill distance and separation of a sample set.

    Parameters
    ----------
    samples : SampleSet
    probe_spacing : float, optional
        Spacing of the probe lattice. Defaults to a quarter of the
        separation, coarsened if the probe count would exceed two million.

    Returns
    -------
    MeshStats
    """
    pts = samples.points
    if len(pts) == 0:
        raise DomainError("empty point set")
    tree = cKDTree(pts)
    if len(pts) > 1:
        d, _ = tree.query(pts, k=2, p=np.inf)
        sep = float(d[:, 1].min())
    else:
        sep = math.inf
    half = samples.half_side
    if probe_spacing is None:
        probe_spacing = min(sep, 2 * half) / 4
    per_axis_cap = int(MAX_PROBES ** (1.0 / samples.q))
    probe_spacing = max(probe_spacing, 2 * half / max(per_axis_cap - 1, 1))
    axis = _lattice(half, probe_spacing)
    step = float(axis[1] - axis[0])
    grids = np.meshgrid(*([axis] * samples.q), indexing="ij")
    probes = np.stack([g.ravel() for g in grids], axis=1)
    dist, _ = tree.query(probes, k=1, p=np.inf)
    return MeshStats(mesh_norm=float(dist.max()) + step / 2, separation=sep, probe_spacing=step)


@dataclass(frozen=True)
class ThinningResult:
    """Outcome of :func:`thin_points`.

    Attributes
    ----------
    samples : SampleSet
        Retained points.
    keep : ndarray of bool
        Mask over the input points.
    cube_index : ndarray of int
        Flat cube index of every input point.
    cube_side : float
    stats : MeshStats
        Mesh statistics of the retained points.
    uniformity_ratio : float
        2 * mesh_norm / separation after thinning.
    """

    samples: SampleSet
    keep: np.ndarray
    cube_index: np.ndarray
    cube_side: float
    stats: MeshStats
    uniformity_ratio: float

    @property
    def uniform(self):
        """Whether separation <= 2 mesh_norm <= 4 separation holds."""
        return (self.stats.separation <= 2 * self.stats.mesh_norm
                and self.uniformity_ratio <= 4.0)


def thin_points(samples, stats=None, probe_spacing=None):
    """Keep one point per cube of a tiling with cube side in [3 delta, 4 delta].

    In each cube the point closest to the cube center (sup-norm) survives,
    ties going to the lexicographically smallest point. With ``delta`` the
    true fill distance every cube holds at least one point; an empty cube
    raises RuntimeError.
    """
    if stats is None:
        stats = mesh_stats(samples, probe_spacing)
    delta = stats.mesh_norm
    if not np.isfinite(delta) or delta <= 0:
        raise DomainError("fill distance must be positive and finite")
    side_total = 2 * samples.half_side
    k = max(1, int(math.floor(side_total / (3 * delta))))
    side = side_total / k
    pts = samples.points
    cell = np.clip(np.floor((pts + samples.half_side) / side).astype(np.int64), 0, k - 1)
    flat = np.ravel_multi_index(cell.T, (k,) * samples.q)
    centers = -samples.half_side + (cell + 0.5) * side
    dist = np.abs(pts - centers).max(axis=1)
    # sort by cube, then distance, then coordinates; first row per cube wins
    order = np.lexsort(tuple(pts[:, i] for i in range(samples.q - 1, -1, -1)) + (dist, flat))
    first = np.ones(order.size, dtype=bool)
    first[1:] = flat[order][1:] != flat[order][:-1]
    keep = np.zeros(len(pts), dtype=bool)
    keep[order[first]] = True
    if np.unique(flat).size != k ** samples.q:
        raise RuntimeError("thinning found an empty cube; the fill distance estimate is too small")
    kept = SampleSet(pts[keep], A=samples.A, n=samples.n)
    post = mesh_stats(kept, probe_spacing)
    ratio = 2 * post.mesh_norm / post.separation if np.isfinite(post.separation) else math.inf
    return ThinningResult(kept, keep, flat, side, post, float(ratio))


def moment_rhs(indices, A):
    """Exact integrals of psi_k(sqrt(2) A y) over R^q for each row k."""
    indices = np.asarray(indices)
    log_val = np.zeros(indices.shape[0])
    zero = np.zeros(indices.shape[0], dtype=bool)
    for i in range(indices.shape[1]):
        k = indices[:, i]
        zero |= (k % 2) == 1
        m = k // 2
        log_val += (0.5 * math.log(2) + 0.25 * math.log(math.pi) + 0.5 * gammaln(k + 1.0)
                    - m * math.log(2) - gammaln(m + 1.0))
    out = np.exp(log_val) * (math.sqrt(2) * A) ** (-indices.shape[1])
    out[zero] = 0.0
    return out


def single_moment_rhs(indices, A):
    """Right-hand side (2A)^{-q/2} at k = 0 and zero elsewhere."""
    indices = np.asarray(indices)
    out = np.zeros(indices.shape[0])
    out[indices.sum(axis=1) == 0] = (2 * A) ** (-indices.shape[1] / 2)
    return out


def min_norm_solve(V, b, rank_tol=1e-10):
    """Minimum-norm least-squares solution of V w = b.

    Uses a complete orthogonal decomposition: pivoted QR of V, rank cut at
    ``rank_tol * |R[0, 0]|``, then a QR of the retained rows of R.

    Returns
    -------
    w : ndarray
    rank : int
    condition : float
        Ratio of the extreme retained diagonal entries of R.
    """
    Q, R, perm = linalg.qr(V, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return np.zeros(V.shape[1]), 0, math.inf
    rank = int(np.sum(diag > rank_tol * diag[0]))
    c = Q[:, :rank].T @ b
    Q2, T = linalg.qr(R[:rank].T, mode="economic")
    z = linalg.solve_triangular(T, c, trans="T")
    w = np.empty(V.shape[1])
    w[perm] = Q2 @ z
    return w, rank, float(diag[0] / diag[rank - 1])


@dataclass(frozen=True)
class QuadratureMeasure:
    """Discrete measure: points with weights plus solve diagnostics."""

    points: np.ndarray
    weights: np.ndarray
    A: float
    n: float
    degree_budget: int
    mode: str = "moment-exact"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.size:
            raise DomainError(f"{pts.shape[0]} points but {w.size} weights")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def q(self):
        return self.points.shape[1]

    @property
    def exactness_level(self):
        """Largest level n with 2 n^2 <= degree_budget."""
        return math.sqrt(self.degree_budget / 2.0)

    def to_dict(self):
        return {"A": self.A, "n": self.n, "q": self.q, "degree_budget": self.degree_budget,
                "mode": self.mode, "n_points": int(self.points.shape[0]),
                "diagnostics": dict(self.diagnostics)}


def default_budget(n):
    """Largest integer not above 2 n^2."""
    return int(math.floor(2.0 * n * n + 1e-9))


def solve_weights(samples, degree_budget=None, mode="moment-exact", beta=BETA_DEFAULT,
                  rank_tol=1e-10, check_mesh=True, max_bytes=MAX_MATRIX_BYTES):
    """Quadrature weights on scattered points.

    Solves sum_y w_y psi_k(sqrt(2) A y) = rhs_k for all |k|_1 <= degree_budget
    in the least-squares sense, taking the minimum-norm solution.

    Parameters
    ----------
    samples : SampleSet
    degree_budget : int, optional
        Defaults to floor(2 n^2).
    mode : {"moment-exact", "single-moment"}
        ``"moment-exact"`` uses the exact Gaussian moments as right-hand
        side. ``"single-moment"`` keeps only the k = 0 row, set to
        (2A)^{-q/2}.
    beta : float
        Constant in the recommended fill distance beta / (n A). A coarser
        set triggers a :class:`MeshWarning`.
    check_mesh : bool
        Compute mesh statistics (costly for large q).

    Returns
    -------
    QuadratureMeasure
    """
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    if degree_budget is None:
        degree_budget = default_budget(samples.n)
    degree_budget = int(degree_budget)
    if degree_budget < 0:
        raise DomainError("degree budget must be non-negative")
    idx = total_degree_indices(samples.q, degree_budget)
    need = idx.shape[0] * len(samples) * 8
    if need > max_bytes:
        raise ConfigurationError(
            f"constraint matrix would need {need / 1e9:.2f} GB "
            f"({idx.shape[0]} constraints x {len(samples)} points); "
            f"limit is {max_bytes / 1e9:.2f} GB")
    V = multi_hermite_basis(idx, samples.points, scale=math.sqrt(2) * samples.A)
    b = moment_rhs(idx, samples.A) if mode == "moment-exact" else single_moment_rhs(idx, samples.A)
    w, rank, cond = min_norm_solve(V, b, rank_tol)
    diag = {
        "n_constraints": int(idx.shape[0]),
        "n_points": len(samples),
        "rank": rank,
        "residual_norm": float(np.linalg.norm(V @ w - b)),
        "condition_estimate": cond,
        "sum_abs_weights": float(np.abs(w).sum()),
        "max_abs_weight": float(np.abs(w).max()),
        "sum_abs_weights_over_nq": float(np.abs(w).sum() / samples.n ** samples.q),
    }
    if check_mesh:
        target = beta / (samples.n * samples.A)
        st = mesh_stats(samples, probe_spacing=target / 4)
        diag["mesh_norm"] = st.mesh_norm
        diag["separation"] = st.separation
        diag["mesh_target"] = target
        if st.mesh_norm > target:
            warnings.warn(f"fill distance {st.mesh_norm:.4g} exceeds beta/(nA) = {target:.4g}",
                          MeshWarning, stacklevel=2)
    qm = QuadratureMeasure(samples.points, w, samples.A, samples.n, degree_budget, mode, diag)
    if abs(samples.A - A_SERO) < 1e-12:
        deg = max(0, degree_budget // 2)
        # the identity needs |k|_1 + |j|_1 <= degree_budget
        diag["product_orthogonality_degree"] = deg
        diag["product_orthogonality_residual"] = product_orthogonality_residual(qm, deg)
    return qm


def product_orthogonality_residual(qm, degree):
    """max |sum_y w_y psi_k(2y/sqrt3) psi_j(2y/sqrt3) - (sqrt3/2)^q delta_kj|
    over |k|_1, |j|_1 <= degree.
    """
    if abs(qm.A - A_SERO) > 1e-12:
        raise DomainError(f"product orthogonality holds for A = 2/sqrt(3) only, got A = {qm.A}")
    idx = total_degree_indices(qm.q, int(degree))
    B = multi_hermite_basis(idx, qm.points, scale=A_SERO)
    G = (B * qm.weights) @ B.T
    G[np.diag_indices_from(G)] -= (math.sqrt(3) / 2) ** qm.q
    return float(np.abs(G).max())
