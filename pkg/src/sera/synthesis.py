"""Synthetic targets, clutter, sample geometries and data evaluators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .exceptions import DomainError
from .quadrature import BETA_DEFAULT, SampleSet, box_half_side

# blur radius presets in units of wavelength / (2 NA)
RESOLUTION_PRESETS = {"abbe": 1.0, "rayleigh": 1.22, "sparrow": 0.94}


def resolution_radius(kind, wavelength, numerical_aperture):
    """Classical resolution radius ``factor * wavelength / (2 NA)``."""
    try:
        factor = RESOLUTION_PRESETS[kind]
    except KeyError:
        raise DomainError(f"unknown preset {kind!r}; pick one of {sorted(RESOLUTION_PRESETS)}")
    if wavelength <= 0 or numerical_aperture <= 0:
        raise DomainError("wavelength and numerical aperture must be positive")
    return factor * wavelength / (2.0 * numerical_aperture)


def _as_matrix(x, q=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None] if q in (None, 1) else x.reshape(1, -1)
    if q is not None and x.shape[1] != q:
        raise DomainError(f"points have dimension {x.shape[1]}, expected {q}")
    return x


@dataclass(frozen=True)
class TargetSpec:
    """Ground-truth point masses in scaled coordinates.

    Parameters
    ----------
    centers : ndarray of shape (L, q)
        Locations x_l; physical locations are ``2 * scale * x_l``.
    amplitudes : ndarray of shape (L,)
    scale : float
        Blur parameter v.
    eta : float
        Separation the generator enforced (0 when unknown).
    """

    centers: np.ndarray
    amplitudes: np.ndarray
    scale: float = 0.5
    eta: float = 0.0

    def __post_init__(self):
        c = np.array(self.centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        a = np.array(self.amplitudes, dtype=float).ravel()
        if c.shape[0] != a.size:
            raise DomainError("need one amplitude per center")
        if self.scale <= 0:
            raise DomainError("scale v must be positive")
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "amplitudes", a)

    @property
    def count(self):
        return int(self.amplitudes.size)

    @property
    def q(self):
        return self.centers.shape[1]

    @property
    def mu(self):
        return float(np.abs(self.amplitudes).min()) if self.count else 0.0

    @property
    def mass(self):
        return float(np.abs(self.amplitudes).sum())

    @property
    def box_radius(self):
        return float(np.abs(self.centers).max()) if self.count else 0.0

    @property
    def min_separation(self):
        if self.count < 2:
            return math.inf
        d = np.linalg.norm(self.centers[:, None] - self.centers[None], axis=-1)
        return float(d[np.triu_indices(self.count, 1)].min())

    @property
    def physical_centers(self):
        return 2.0 * self.scale * self.centers

    def to_dict(self):
        sep = self.min_separation
        return {
            "count": self.count, "q": self.q,
            "centers": self.centers.tolist(), "amplitudes": self.amplitudes.tolist(),
            "scale_v": self.scale, "eta": self.eta, "mu": self.mu, "M": self.mass,
            "B": self.box_radius, "min_separation": sep if math.isfinite(sep) else None,
        }

    @classmethod
    def from_dict(cls, d):
        q = int(d.get("q", 1))
        centers = np.asarray(d["centers"], dtype=float).reshape(-1, q)
        return cls(centers, d["amplitudes"], d.get("scale_v", 0.5), d.get("eta", 0.0))


@dataclass(frozen=True)
class ClutterSpec:
    """Finite signed atomic measure sum_j c_j delta_{u_j}."""

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        u = np.array(self.positions, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        c = np.array(self.masses, dtype=float).ravel()
        if u.shape[0] != c.size:
            raise DomainError("need one mass per clutter position")
        object.__setattr__(self, "positions", u)
        object.__setattr__(self, "masses", c)

    @property
    def bv_norm(self):
        return float(np.abs(self.masses).sum())

    def blur(self, points):
        """sum_j c_j exp(-|x - u_j|^2) at each row of ``points``."""
        return _gauss_sum(points, self.positions, self.masses)

    def to_dict(self):
        return {"kind": "atomic", "positions": self.positions.tolist(),
                "masses": self.masses.tolist(), "bv_norm": self.bv_norm}


@dataclass(frozen=True)
class DensityClutter:
    """Piecewise-constant clutter density on a uniform cell partition of a box.

    The blur of each cell is evaluated exactly through products of error
    functions, so ``bv_norm`` is exact as well.
    """

    edges: tuple
    values: np.ndarray

    @property
    def q(self):
        return len(self.edges)

    @property
    def bv_norm(self):
        vol = np.ones(())
        for e in self.edges:
            vol = np.multiply.outer(vol, np.diff(e))
        return float(np.sum(np.abs(self.values) * vol))

    def blur(self, points):
        pts = _as_matrix(points, self.q)
        per_axis = []
        for i, e in enumerate(self.edges):
            # integral of exp(-(x-u)^2) over each cell along axis i
            z = pts[:, i][:, None] - np.asarray(e)[None, :]
            per_axis.append(0.5 * math.sqrt(math.pi) * (erf(z[:, :-1]) - erf(z[:, 1:])))
        vals = np.asarray(self.values)
        if self.q == 1:
            return per_axis[0] @ vals
        letters = "abcdefgh"[: self.q]
        spec = ",".join(f"p{c}" for c in letters) + "," + letters + "->p"
        return np.einsum(spec, *per_axis, vals, optimize=True)

    def to_dict(self):
        return {"kind": "density", "edges": [list(map(float, e)) for e in self.edges],
                "values": np.asarray(self.values).tolist(), "bv_norm": self.bv_norm}


def _gauss_sum(points, centers, coeffs):
    centers = np.asarray(centers, dtype=float)
    pts = _as_matrix(points, centers.shape[1] if centers.ndim == 2 else None)
    if centers.size == 0:
        return np.zeros(pts.shape[0])
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2) @ np.asarray(coeffs, dtype=float)


def gen_target(seed, L, q=1, box_radius=3.0, eta_min=1.0, amp_range=(1.0, 2.0),
               scale=0.5, max_tries=100_000):
    """Random target with separated centers and signed amplitudes.

    Centers are drawn uniformly from [-box_radius, box_radius]^q and
    rejected until pairwise Euclidean distances are at least ``eta_min``.
    After 200 consecutive rejections the partial packing is discarded.
    Amplitude magnitudes are uniform in ``amp_range`` with random signs.

    Raises
    ------
    DomainError
        If no packing was found within ``max_tries`` draws.
    """
    if L < 0 or q < 1:
        raise DomainError("need L >= 0 and q >= 1")
    lo, hi = amp_range
    if not 0 < lo <= hi:
        raise DomainError("amplitude range must satisfy 0 < lo <= hi")
    rng = np.random.default_rng(seed)
    centers = []
    tries = stuck = 0
    while len(centers) < L:
        if tries >= max_tries:
            raise DomainError(
                f"could not place {L} centers at separation {eta_min} in a box of radius "
                f"{box_radius} after {max_tries} draws")
        tries += 1
        c = rng.uniform(-box_radius, box_radius, q)
        if all(np.linalg.norm(c - o) >= eta_min for o in centers):
            centers.append(c)
            stuck = 0
        else:
            stuck += 1
            if stuck >= 200:
                # greedy placement can wedge itself; start the packing over
                centers, stuck = [], 0
    amps = rng.uniform(lo, hi, L) * rng.choice([-1.0, 1.0], L)
    return TargetSpec(np.array(centers).reshape(L, q), amps, scale, eta_min)


def gen_clutter(seed, count, q, box_radius, bv_norm):
    """Atomic clutter with ``count`` atoms and total variation ``bv_norm``."""
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-box_radius, box_radius, (count, q))
    raw = rng.uniform(0.5, 1.5, count) * rng.choice([-1.0, 1.0], count)
    masses = raw / np.abs(raw).sum() * bv_norm if count else raw
    return ClutterSpec(pos, masses)


def gen_density_clutter(seed, q, box_radius, bv_norm, cells=8):
    """Random piecewise-constant density clutter with total variation ``bv_norm``."""
    rng = np.random.default_rng(seed)
    edges = tuple(np.linspace(-box_radius, box_radius, cells + 1) for _ in range(q))
    vals = rng.uniform(-1.0, 1.0, (cells,) * q)
    tmp = DensityClutter(edges, vals)
    return DensityClutter(edges, vals * (bv_norm / tmp.bv_norm))


def observation_noise(seed, size, level):
    """I.i.d. uniform noise on [-level, level], added per sample.

    This perturbation is not a clutter measure, so outputs label it apart.
    """
    rng = np.random.default_rng(seed)
    return rng.uniform(-level, level, size)


def eval_blurred(target, clutter, points):
    """Scaled data G(x) = sum_l a_l exp(-|x - x_l|^2) plus blurred clutter."""
    pts = _as_matrix(points, target.q if target is not None else None)
    out = np.zeros(pts.shape[0])
    if target is not None:
        out += _gauss_sum(pts, target.centers, target.amplitudes)
    if clutter is not None:
        out += clutter.blur(pts)
    return out


def eval_model_G(target, y, v=None):
    """Unscaled model G(y, v) = sum_l a_l g_v(y - y_l), with y_l = 2 v x_l."""
    v = target.scale if v is None else v
    if v <= 0:
        raise DomainError("v must be positive")
    y = _as_matrix(y, target.q)
    d2 = ((y[:, None, :] - 2 * v * target.centers[None]) ** 2).sum(-1)
    return (4 * math.pi * v * v) ** (-target.q / 2) * (np.exp(-d2 / (4 * v * v)) @ target.amplitudes)


def eval_extended_source(target, v0, y):
    """Point masses replaced by normalized Gaussian pixels g_{v0}.

    Centers sit at ``2 * target.scale * x_l``.
    """
    if v0 <= 0:
        raise DomainError("v0 must be positive")
    y = _as_matrix(y, target.q)
    d2 = ((y[:, None, :] - target.physical_centers[None]) ** 2).sum(-1)
    return (4 * math.pi * v0 * v0) ** (-target.q / 2) * (np.exp(-d2 / (4 * v0 * v0)) @ target.amplitudes)


def eval_exp_sum(exponents, coefficients, y):
    """f(y) = sum_l b_l exp(2 y_l . y).

    Raises
    ------
    DomainError
        When an exponent overflows double precision; the message names the
        first offending point.
    """
    ex = np.asarray(exponents, dtype=float)
    if ex.ndim == 1:
        ex = ex[:, None]
    y = _as_matrix(y, ex.shape[1])
    arg = 2.0 * y @ ex.T
    bad = np.nonzero((arg > 709.0).any(axis=1))[0]
    if bad.size:
        raise DomainError(f"exponential sum overflows at {bad.size} points, first {y[bad[0]].tolist()}")
    return np.exp(arg) @ np.asarray(coefficients, dtype=float)


def exp_sum_amplitudes(exponents, coefficients):
    """Amplitudes a_l = pi^{q/2} exp(|y_l|^2) b_l of the equivalent blurred target."""
    ex = np.asarray(exponents, dtype=float)
    if ex.ndim == 1:
        ex = ex[:, None]
    return math.pi ** (ex.shape[1] / 2) * np.exp((ex ** 2).sum(1)) * np.asarray(coefficients, dtype=float)


def gen_sample_points(q, A, n, density_factor=1.0, beta=BETA_DEFAULT, seed=0, jitter=True):
    """Jittered lattice over [-3n/A, 3n/A]^q.

    The lattice spacing h is the largest value not above
    ``density_factor * beta / (n A)`` that fits the half side an integer
    number of times; each coordinate is jittered uniformly by up to h/4 and
    clipped to the box, so the fill distance is at most 3h/4.

    Returns
    -------
    SampleSet
    """
    if not 0 < density_factor <= 1:
        raise DomainError("density_factor must lie in (0, 1]")
    half = box_half_side(A, n)
    target = density_factor * beta / (n * A)
    m = max(1, math.ceil(half / target - 1e-12))
    h = half / m
    axis = np.arange(-m, m + 1) * h
    grids = np.meshgrid(*([axis] * q), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    if jitter:
        rng = np.random.default_rng(seed)
        pts = np.clip(pts + rng.uniform(-h / 4, h / 4, pts.shape), -half, half)
    return SampleSet(pts, A=A, n=n)
