"""Spike recovery from operator fields and exponential-sum separation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist

from .exceptions import ClusterGeometryError, DomainError, PrecisionError, RecoveryError
from .hermite import CutoffSpec
from .kernels import KernelSpec, kernel_matrix, phi_diag, phi_n
from .operator import (FieldValues, assemble_operator, build_grid, default_spacing,
                       log_rounding_floor)

AMPLITUDE_MODES = ("normalized", "raw")
RESCALE_MODES = ("derived", "half-scale")
REFINE_MODES = ("theorem", "fixed")


@dataclass(frozen=True)
class RecoveryParams:
    """Tunable parameters of the recovery pipeline.

    Parameters
    ----------
    n : float
        Coarse level used for peak values and amplitudes.
    rho : float
        Refinement ratio, at least 1. With ``refine="theorem"`` the refined
        level is max(rho, 2 gamma / alpha, 1) * n; with ``"fixed"`` it is
        rho * n.
    mu, eta : float
        Smallest amplitude magnitude and smallest spike separation.
    S : int, optional
        Localization exponent, defaults to q + 2.
    box_radius : float, optional
        Sup-norm radius where spikes are expected. Estimated from a coarse
        pass when omitted.
    box_fraction : float
        Radius of the coarse pass box in units of n. The final box is the
        larger of this and the coarse spike box widened by alpha / n.
    M_hint : float, optional
        Total mass sum |a|. Estimated from a coarse pass when omitted.
    noise_bound : float
        Known bound on the clutter field, entering the epsilon proxy.
    check_precision : bool
        Refuse levels whose rounding floor exceeds A2 mu / 16.
    validate_clusters : bool
        Raise on cluster geometry violations instead of only reporting them.
    """

    n: float = 4.0
    rho: float = 1.0
    mu: float = 1.0
    eta: float = 1.0
    S: int = None
    amplitude_mode: str = "normalized"
    rescale_mode: str = "derived"
    refine: str = "theorem"
    scale_v: float = 0.5
    box_radius: float = None
    M_hint: float = None
    grid_spacing: float = None
    noise_bound: float = 0.0
    box_fraction: float = 0.5
    cutoff_shape: str = "exp"
    check_precision: bool = True
    validate_clusters: bool = True

    def __post_init__(self):
        if not self.n > 0:
            raise DomainError("n must be positive")
        if not self.rho >= 1:
            raise DomainError(f"rho must be at least 1, got {self.rho}")
        if not self.mu > 0 or not self.eta > 0:
            raise DomainError("mu and eta must be positive")
        if not self.scale_v > 0:
            raise DomainError("scale_v must be positive")
        for name, allowed in (("amplitude_mode", AMPLITUDE_MODES),
                              ("rescale_mode", RESCALE_MODES), ("refine", REFINE_MODES)):
            if getattr(self, name) not in allowed:
                raise DomainError(f"{name} must be one of {allowed}")

    def kernel_spec(self, q, n=None):
        return KernelSpec(self.n if n is None else n, q=q, S=self.S,
                          cutoff=CutoffSpec(shape=self.cutoff_shape))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class RecoveryConstants:
    """Empirical kernel constants and target bounds.

    ``A1``, ``A2``, ``C``, ``C1`` and ``alpha`` come from sampling the kernel;
    ``gamma`` follows from them together with ``M`` and ``mu``.
    """

    A1: float
    A2: float
    C: float
    C1: float
    alpha: float
    gamma: float
    M: float
    B: float
    mu: float
    S: int
    n: float
    box_radius: float

    def with_mass(self, M):
        return replace(self, M=float(M), gamma=gamma_from(self.A1, self.A2, M, self.mu, self.S))

    def to_dict(self):
        return asdict(self)


def gamma_from(A1, A2, M, mu, S):
    """max(1, (8 A1 M / (A2 mu))^(1/S))."""
    return max(1.0, (8.0 * A1 * M / (A2 * mu)) ** (1.0 / S))


def _box_lattice(radius, spacing, q):
    m = max(1, math.ceil(radius / spacing - 1e-9))
    axis = np.arange(-m, m + 1) * (radius / m)
    grids = np.meshgrid(*([axis] * q), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1), axis


def _directions(q):
    if q == 1:
        return np.array([[1.0], [-1.0]])
    # coordinate axes and diagonals
    dirs = []
    for v in np.ndindex(*([3] * q)):
        d = np.array(v, dtype=float) - 1
        if np.any(d):
            dirs.append(d / np.linalg.norm(d))
    return np.array(dirs)


@lru_cache(maxsize=32)
def kernel_constants(spec, box_radius):
    """A1, A2, C, C1 and alpha estimated on sampled points.

    Sampling
    --------
    * A2: minimum of Phi_n(x, x) on a lattice of spacing 0.25/n over
      |x|_inf <= box_radius.
    * C: largest c such that Phi_n(x, x) >= A2 on |x|_inf <= c n, scanned on
      the working box.
    * C1: largest difference quotient of n^q Phi_n(x, x) between lattice
      neighbours.
    * A1: maximum of |Phi_n(x, y)| max(1, (n|x-y|)^S) with y on a coarse
      lattice of the spike box and x on the working box.
    * alpha: largest radius r on a 0.02 step such that
      0 <= Phi_n(x, y) <= Phi_n(y, y) + C1 n^-q |x - y| for all sampled
      pairs with |x - y| <= r / n.
    """
    n, q, S = spec.n, spec.q, spec.S
    if not 0 < box_radius <= spec.half_side * (1 + 1e-12):
        raise DomainError(f"box radius must lie in (0, {spec.half_side:.6g}]")
    step = 0.25 / n
    pts, axis = _box_lattice(box_radius, step, q)
    diag = phi_diag(spec, pts)
    A2 = float(diag.min())
    if A2 <= 0:
        raise DomainError(
            f"Phi_n(x,x) reaches {A2:.3g} <= 0 on |x|_inf <= {box_radius:g}; "
            "use a smaller box or a larger n")
    # C: scan the working box along sup-norm shells
    wpts, _ = _box_lattice(spec.half_side, 0.5 / n, q)
    wdiag = phi_diag(spec, wpts)
    rad = np.abs(wpts).max(axis=1)
    order = np.argsort(rad, kind="stable")
    run_min = np.minimum.accumulate(wdiag[order])
    ok = run_min >= A2 * (1 - 1e-12)
    C = float(rad[order][ok].max() / n) if ok.any() else box_radius / n
    C = max(C, box_radius / n)
    # C1 from neighbour differences on the A2 lattice
    dgrid = diag.reshape((axis.size,) * q)
    h = axis[1] - axis[0]
    slopes = [np.abs(np.diff(dgrid, axis=i)).max() / h for i in range(q)]
    C1 = float(max(slopes) * n ** q)
    # A1
    ystep = box_radius / (20 if q == 1 else 4)
    ypts, _ = _box_lattice(box_radius, ystep, q)
    xpts, _ = _box_lattice(spec.half_side, step, q)
    K = kernel_matrix(spec, xpts, ypts)
    dist = cdist(xpts, ypts)
    A1 = float((np.abs(K) * np.maximum(1.0, (n * dist) ** S)).max())
    # alpha
    radii = np.arange(1, 201) * 0.02
    dirs = _directions(q)
    ydiag = phi_diag(spec, ypts)
    d = radii / n
    X = ypts[:, None, None, :] + d[None, None, :, None] * dirs[None, :, None, :]
    Y = np.broadcast_to(ypts[:, None, None, :], X.shape)
    vals = phi_n(spec, X, Y)
    upper = ydiag[:, None, None] + C1 * n ** (-q) * d[None, None, :]
    good = (vals >= 0) & (vals <= upper)
    good_r = good.all(axis=(0, 1))
    bad = np.nonzero(~good_r)[0]
    first_bad = bad[0] if bad.size else radii.size
    if first_bad == 0:
        raise DomainError("no positive near-diagonal radius found for this kernel")
    alpha = float(radii[first_bad - 1])
    return {"A1": A1, "A2": A2, "C": C, "C1": C1, "alpha": alpha}


def estimate_constants(spec, params, box_radius, M_hint=None, B_hat=0.0):
    """Kernel constants plus gamma for the given mass.

    Parameters
    ----------
    spec : KernelSpec
    params : RecoveryParams
    box_radius : float
        At most 3 sqrt(3) n / 2.
    M_hint : float, optional
        Total mass; falls back to ``params.M_hint`` and then to ``params.mu``.
    B_hat : float
        Spike box radius reported in the sufficiency check.
    """
    if box_radius > spec.half_side * (1 + 1e-12):
        raise DomainError(f"box radius {box_radius:g} exceeds the working box {spec.half_side:g}")
    kc = kernel_constants(spec, float(box_radius))
    M = M_hint if M_hint is not None else (params.M_hint if params.M_hint is not None else params.mu)
    return RecoveryConstants(
        A1=kc["A1"], A2=kc["A2"], C=kc["C"], C1=kc["C1"], alpha=kc["alpha"],
        gamma=gamma_from(kc["A1"], kc["A2"], M, params.mu, spec.S),
        M=float(M), B=float(B_hat), mu=params.mu, S=spec.S, n=spec.n,
        box_radius=float(box_radius))


@dataclass(frozen=True)
class LargeSet:
    """Grid points where the field magnitude reaches the threshold."""

    indices: np.ndarray
    points: np.ndarray
    threshold: float

    def __len__(self):
        return int(self.indices.size)


def threshold_field(field, constants, mu):
    """{x in grid : |field(x)| >= A2 mu / 2}."""
    thr = constants.A2 * mu / 2.0
    idx = np.nonzero(np.abs(field.values) >= thr)[0]
    return LargeSet(idx, field.points[idx], thr)


@dataclass(frozen=True)
class Cluster:
    indices: np.ndarray
    points: np.ndarray
    diameter: float


def _diameter(points):
    if len(points) < 2:
        return 0.0
    if len(points) > 4000:
        # the diameter is attained on the bounding-box extreme points
        ext = np.unique(np.concatenate([np.argmin(points, 0), np.argmax(points, 0)]))
        return float(cdist(points[ext], points).max())
    return float(pdist(points).max())


def cluster(large, eta, max_diameter=None, validate=True):
    """Single-linkage components with link distance below eta / 2.

    Clusters are ordered by their lexicographically smallest point.

    Parameters
    ----------
    large : LargeSet
    eta : float
    max_diameter : float, optional
        Upper bound 2 gamma / N on cluster diameters.
    validate : bool
        Raise :class:`ClusterGeometryError` on violations.

    Returns
    -------
    clusters : list of Cluster
    report : dict
    """
    if eta <= 0:
        raise DomainError("eta must be positive")
    pts = large.points
    report = {"link_radius": eta / 2, "max_diameter": max_diameter, "violations": []}
    if len(pts) == 0:
        report["min_gap"] = None
        return [], report
    tree = cKDTree(pts)
    pairs = tree.query_pairs(eta / 2 * (1 - 1e-12), output_type="ndarray")
    m = len(pts)
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    ncomp, labels = connected_components(adj, directed=False)
    groups = []
    for c in range(ncomp):
        members = np.nonzero(labels == c)[0]
        sub = pts[members]
        lead = np.lexsort(sub.T[::-1])[0]
        groups.append((tuple(sub[lead]), members))
    groups.sort(key=lambda g: g[0])
    clusters = [Cluster(large.indices[mem], pts[mem], _diameter(pts[mem])) for _, mem in groups]
    gaps = []
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            gaps.append(float(cdist(clusters[i].points, clusters[j].points).min()))
    report["min_gap"] = min(gaps) if gaps else None
    report["diameters"] = [c.diameter for c in clusters]
    if max_diameter is not None:
        for i, c in enumerate(clusters):
            if c.diameter > max_diameter * (1 + 1e-9):
                report["violations"].append({"cluster": i, "kind": "diameter",
                                             "value": c.diameter, "bound": max_diameter})
    if gaps and min(gaps) < eta / 2 * (1 - 1e-9):
        report["violations"].append({"kind": "gap", "value": min(gaps), "bound": eta / 2})
    if validate and report["violations"]:
        raise ClusterGeometryError(
            "cluster geometry inconsistent with (mu, eta, n); increase n", report)
    return clusters, report


def locate_peaks(clusters, coarse_field):
    """Per cluster the point maximizing |coarse_field|, ties to the lexicographically smallest."""
    vals = np.abs(coarse_field.values)
    centers = []
    for c in clusters:
        if c.indices.size == 0:
            raise RecoveryError("empty cluster")
        v = vals[c.indices]
        top = np.nonzero(v == v.max())[0]
        cand = c.points[top]
        centers.append(cand[np.lexsort(cand.T[::-1])[0]])
    q = coarse_field.grid.q
    return np.array(centers, dtype=float).reshape(-1, q)


def estimate_amplitudes(centers, values, spec, mode="normalized", A2=None):
    """Amplitudes from coarse field values at the centers.

    ``"normalized"`` divides by Phi_n(x, x); ``"raw"`` returns the
    field values. In normalized mode a diagonal below A2 / 2 means the center
    left the validity box and raises RecoveryError.
    """
    values = np.asarray(values, dtype=float)
    if mode == "raw":
        return values.copy()
    if mode != "normalized":
        raise DomainError(f"unknown amplitude mode {mode!r}")
    if len(values) == 0:
        return values.copy()
    d = np.atleast_1d(phi_diag(spec, np.asarray(centers).reshape(-1, spec.q)))
    if A2 is not None and np.any(d < A2 / 2):
        bad = int(np.argmin(d))
        raise RecoveryError(f"Phi_n(x,x) = {d[bad]:.3g} < A2/2 at center {centers[bad]}; "
                            "center outside the validity box")
    return values / d


def rescale(centers, amplitudes, v, mode="derived"):
    """Map scaled-coordinate spikes back to the model coordinates.

    ``"derived"``: z = 2 v x with amplitudes unchanged. ``"half-scale"``:
    z = v x and amplitudes times (pi v^2)^{q/2}.
    """
    if v <= 0:
        raise DomainError("v must be positive")
    centers = np.asarray(centers, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    if mode == "derived":
        return 2 * v * centers, amplitudes.copy()
    if mode == "half-scale":
        q = centers.shape[1] if centers.ndim == 2 else 1
        return v * centers, (math.pi * v * v) ** (q / 2) * amplitudes
    raise DomainError(f"unknown rescale mode {mode!r}")


def heat_scale(c, t):
    """Blur scale v = sqrt(c t) of heat diffusion after time t."""
    if c <= 0 or t <= 0:
        raise DomainError("c and t must be positive")
    return math.sqrt(c * t)


def heat_time(v, c):
    """Inverse of :func:`heat_scale`: t = v^2 / c."""
    if c <= 0 or v <= 0:
        raise DomainError("v and c must be positive")
    return v * v / c


@dataclass
class RecoveredSpikes:
    """Recovered spikes in scaled coordinates plus diagnostics.

    ``centers`` and ``amplitudes`` refer to the scaled data; ``rescaled``
    holds them mapped back with ``scale_v``.
    """

    centers: np.ndarray
    amplitudes: np.ndarray
    scale_v: float = 0.5
    rescale_mode: str = "derived"
    cluster_diagnostics: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict, repr=False)

    @property
    def count(self):
        return int(len(self.amplitudes))

    @property
    def rescaled(self):
        if self.count == 0:
            return self.centers.copy(), self.amplitudes.copy()
        return rescale(self.centers, self.amplitudes, self.scale_v, self.rescale_mode)

    def to_dict(self):
        zc, za = self.rescaled
        return {
            "count": self.count,
            "centers": np.asarray(self.centers).tolist(),
            "amplitudes": np.asarray(self.amplitudes).tolist(),
            "scale_v": self.scale_v,
            "rescale_mode": self.rescale_mode,
            "rescaled_centers": np.asarray(zc).tolist(),
            "rescaled_amplitudes": np.asarray(za).tolist(),
            "cluster_diagnostics": self.cluster_diagnostics,
            "diagnostics": self.diagnostics,
        }


def refined_level(params, constants):
    """Refined level N from the refinement rule in ``params``."""
    if params.refine == "fixed":
        return params.rho * params.n
    return max(params.rho, 2 * constants.gamma / constants.alpha, 1.0) * params.n


def sufficiency_report(constants, eta, n, q, eps_proxy):
    """Compare n and the epsilon proxy with the sufficient conditions."""
    c = constants
    terms = {
        "one": 1.0,
        "4gamma/eta": 4 * c.gamma / eta,
        "2B/C": 2 * c.B / c.C,
        "4gamma/sqrtC": 4 * c.gamma / math.sqrt(c.C),
        "(A2/(4C1gamma))^(1/(q+1))": (c.A2 / (4 * c.C1 * c.gamma)) ** (1.0 / (q + 1)),
    }
    need = max(terms.values())
    eps_limit = c.mu * c.A2 / 4
    return {
        "terms": terms,
        "n_required": need,
        "n": n,
        "n_ok": bool(n >= need),
        "eps_proxy": eps_proxy,
        "eps_limit": eps_limit,
        "eps_ok": bool(eps_proxy <= eps_limit),
        "passed": bool(n >= need and eps_proxy <= eps_limit),
    }


def eps_proxy(constants, eta, n, q, noise_bound=0.0):
    """noise + 2^S A1 M / (n eta)^S + 2 M C1 gamma / n^(q+1)."""
    c = constants
    return (noise_bound + 2.0 ** c.S * c.A1 * c.M / (n * eta) ** c.S
            + 2 * c.M * c.C1 * c.gamma / n ** (q + 1))


def _coarse_pass(g, qm, params, spec, constants, grid):
    op = assemble_operator(qm, grid, spec)
    fld = FieldValues(grid, op.apply(g), spec.n)
    large = threshold_field(fld, constants, params.mu)
    clusters, _ = cluster(large, params.eta, validate=False)
    centers = locate_peaks(clusters, fld)
    vals = np.array([fld.values[_index_of(c, centers[i])] for i, c in enumerate(clusters)])
    amps = estimate_amplitudes(centers, vals, spec, "normalized")
    return centers, amps, op


def recover(data, qm, params):
    """Recover spikes from samples of the scaled data.

    Steps: coarse pass at level n for the mass and spike box, constants,
    refined level N, precision pre-check, fields at N and n on one grid,
    threshold of the level-N field, clustering, peaks and amplitudes from
    the level-n field.

    Parameters
    ----------
    data : ndarray of shape (m,)
        Values of the scaled data at ``qm.points``.
    qm : QuadratureMeasure
    params : RecoveryParams

    Returns
    -------
    RecoveredSpikes

    Raises
    ------
    PrecisionError
        The refined level amplifies rounding beyond A2 mu / 16.
    ClusterGeometryError
        Clusters violate the diameter or gap bounds.
    """
    g = np.asarray(data, dtype=float).ravel()
    if g.size != qm.points.shape[0]:
        raise DomainError(f"{g.size} data values for {qm.points.shape[0]} sample points")
    if not np.all(np.isfinite(g)):
        raise DomainError("data values must be finite")
    q = qm.q
    spec_n = params.kernel_spec(q)
    n = spec_n.n
    diag = {"n": n, "q": q, "params": params.to_dict()}

    # coarse pass: spike box and total mass
    boot_radius = (params.box_radius if params.box_radius is not None
                   else min(params.box_fraction * n, spec_n.half_side))
    boot_const = estimate_constants(spec_n, params, boot_radius, params.M_hint)
    coarse_grid = build_grid(n, q, params.grid_spacing or default_spacing(n, boot_const.alpha))
    c_centers, c_amps, _ = _coarse_pass(g, qm, params, spec_n, boot_const, coarse_grid)
    B_hat = float(np.abs(c_centers).max()) if len(c_centers) else 0.0
    M_hat = float(np.abs(c_amps).sum())
    diag["bootstrap"] = {"box_radius": boot_radius, "count": int(len(c_amps)),
                         "M_hat": M_hat, "B_hat": B_hat}
    if params.box_radius is not None:
        box = params.box_radius
    else:
        box = min(spec_n.half_side, max(boot_radius, B_hat + boot_const.alpha / n))
    M = params.M_hint if params.M_hint is not None else max(M_hat, params.mu)
    const = estimate_constants(spec_n, params, box, M, B_hat)
    diag["constants"] = const.to_dict()

    N = refined_level(params, const)
    spec_N = params.kernel_spec(q, N)
    diag["N"] = N
    diag["refine"] = params.refine

    # rounding floor of the refined field, checked before any heavy work
    factor = qm.weights * np.exp(-(qm.points ** 2).sum(1) / 3.0)
    log_floor = log_rounding_floor(spec_N, factor, g)
    floor_N = math.exp(log_floor) if log_floor < 709 else math.inf
    limit = const.A2 * params.mu / 16
    diag["precision"] = {"rounding_floor": floor_N,
                         "log10_rounding_floor": log_floor / math.log(10), "limit": limit}
    if params.check_precision and floor_N > limit:
        raise PrecisionError(
            f"refined level N = {N:.4g} has Phi_N^* layer weights up to "
            f"3^{(spec_N.degree_cap - 1) / 2:.1f}; estimated rounding floor "
            f"1e{log_floor / math.log(10):.1f} exceeds A2 mu / 16 = {limit:.3g}. "
            "Use refine='fixed' with a smaller rho, or a smaller n.",
            floor=floor_N, limit=limit, level=N)

    spacing = params.grid_spacing or default_spacing(N, const.alpha)
    grid = build_grid(N, q, spacing)
    op_N = assemble_operator(qm, grid, spec_N)
    op_n = assemble_operator(qm, grid, spec_n)
    field_N = FieldValues(grid, op_N.apply(g), N)
    field_n = FieldValues(grid, op_n.apply(g), n)
    diag["grid"] = grid.to_dict()

    large = threshold_field(field_N, const, params.mu)
    diag["threshold"] = large.threshold
    diag["large_set_size"] = len(large)
    max_diam = 2 * const.gamma / N
    clusters, creport = cluster(large, params.eta, max_diam, validate=params.validate_clusters)
    centers = locate_peaks(clusters, field_n)
    peak_vals = np.array([field_n.values[_index_of(c, centers[i])] for i, c in enumerate(clusters)])
    amps = estimate_amplitudes(centers, peak_vals, spec_n, params.amplitude_mode, const.A2)
    if params.amplitude_mode == "normalized":
        norm_amps = amps
    else:
        norm_amps = estimate_amplitudes(centers, peak_vals, spec_n, "normalized")

    # clutter proxy: coarse field left over after removing the recovered spikes,
    # measured at least eta/2 away from every center
    resid = field_n.values.copy()
    if len(centers):
        resid -= kernel_matrix(spec_n, grid.points, centers) @ norm_amps
        far = cdist(grid.points, centers).min(axis=1) >= params.eta / 2
    else:
        far = np.ones(grid.size, dtype=bool)
    clutter = float(np.abs(resid[far]).max()) if far.any() else 0.0
    eps = eps_proxy(const, params.eta, n, q, params.noise_bound)
    suff = sufficiency_report(const, params.eta, n, q, eps)
    diag["epsilon_proxy"] = eps
    diag["sufficiency"] = suff
    diag["clutter_estimate"] = clutter
    diag["clutter_limit"] = limit
    diag["reliable"] = bool(clutter <= limit and suff["passed"])
    diag["localization_bound"] = max_diam
    cdiag = dict(creport)
    cdiag["peak_values"] = peak_vals.tolist()
    return RecoveredSpikes(centers, amps, params.scale_v, params.rescale_mode, cdiag, diag,
                           {"N": field_N, "n": field_n})


def _index_of(cl, point):
    hit = np.nonzero(np.all(cl.points == point, axis=1))[0]
    return cl.indices[hit[0]]


@dataclass
class SeparationResult:
    """Exponents and coefficients of a separated exponential sum."""

    exponents: np.ndarray
    coefficients: np.ndarray
    spikes: RecoveredSpikes

    @property
    def count(self):
        return int(len(self.coefficients))

    def to_dict(self):
        return {"count": self.count, "exponents": self.exponents.tolist(),
                "coefficients": self.coefficients.tolist(), "spikes": self.spikes.to_dict()}


def exp_sum_transform(points, f_values):
    """pi^{q/2} exp(-|x|^2) f(x), with an overflow check."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    f = np.asarray(f_values, dtype=float).ravel()
    with np.errstate(over="ignore", invalid="ignore"):
        out = math.pi ** (pts.shape[1] / 2) * np.exp(-(pts ** 2).sum(1)) * f
    bad = np.nonzero(~np.isfinite(out) | ~np.isfinite(f))[0]
    if bad.size:
        shown = pts[bad[:5]].tolist()
        raise DomainError(f"transformed data not finite at {bad.size} points, e.g. {shown}")
    return out


def separate_exponential_sum(qm, f_values, params):
    """Exponents y_l and coefficients b_l of f(y) = sum_l b_l exp(2 y_l . y).

    The samples are transformed to blurred spikes with amplitudes
    pi^{q/2} exp(|y_l|^2) b_l at y_l, recovered, and inverted.
    """
    if params.scale_v != 0.5 or params.rescale_mode != "derived":
        params = replace(params, scale_v=0.5, rescale_mode="derived")
    G = exp_sum_transform(qm.points, f_values)
    spikes = recover(G, qm, params)
    y_hat, a_hat = spikes.rescaled
    q = qm.q
    b_hat = math.pi ** (-q / 2) * np.exp(-(np.asarray(y_hat) ** 2).sum(1)) * a_hat \
        if spikes.count else np.zeros(0)
    return SeparationResult(np.asarray(y_hat).reshape(-1, q), np.asarray(b_hat), spikes)
