"""Scikit-learn style estimators wrapping the functional API."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DomainError
from .kernels import KernelSpec, kernel_matrix
from .operator import assemble_operator, build_grid, default_spacing
from .quadrature import A_SERO, BETA_DEFAULT, SampleSet, solve_weights
from .recovery import RecoveryParams, recover, separate_exponential_sum


def check_points(X, q=None):
    """Validate sample points, returning a float (m, q) array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("expected a non-empty (n_samples, q) array")
    if not np.all(np.isfinite(X)):
        raise DomainError("points must be finite")
    if q is not None and X.shape[1] != q:
        raise DomainError(f"expected q={q} columns, got {X.shape[1]}")
    return X


def check_values(y, m):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != m:
        raise DomainError(f"expected {m} values per frame, got {y.shape[-1]}")
    if not np.all(np.isfinite(y)):
        raise DomainError("values must be finite")
    return y


class MZQuadrature(BaseEstimator):
    """Quadrature weights on scattered points.

    Parameters
    ----------
    n : float
        Level whose box [-3n/A, 3n/A]^q must contain the points.
    A : float
    mode : {"moment-exact", "single-moment"}
    degree_budget : int, optional
        Defaults to floor(2 n^2).
    beta : float
    check_mesh : bool

    Attributes
    ----------
    measure_ : QuadratureMeasure
    weights_ : ndarray
    diagnostics_ : dict
    """

    def __init__(self, n=3.0, A=A_SERO, mode="moment-exact", degree_budget=None,
                 beta=BETA_DEFAULT, check_mesh=True):
        self.n = n
        self.A = A
        self.mode = mode
        self.degree_budget = degree_budget
        self.beta = beta
        self.check_mesh = check_mesh

    def fit(self, X, y=None):
        X = check_points(X)
        samples = SampleSet(X, A=self.A, n=self.n)
        self.measure_ = solve_weights(samples, self.degree_budget, self.mode, self.beta,
                                      check_mesh=self.check_mesh)
        self.weights_ = np.asarray(self.measure_.weights)
        self.diagnostics_ = dict(self.measure_.diagnostics)
        return self

    def integrate(self, values):
        """sum_y w_y values_y."""
        check_is_fitted(self, "measure_")
        return check_values(values, self.weights_.size) @ self.weights_


class SEROTransformer(TransformerMixin, BaseEstimator):
    """Maps sample vectors to operator fields on an evaluation grid.

    ``fit`` takes the sample points and solves the quadrature at level
    ``quadrature_level`` (default ``level``); ``transform`` takes an array of
    frames of shape (n_frames, n_samples) and returns (n_frames, n_grid).

    Parameters
    ----------
    level : float
    quadrature_level : float, optional
    grid_level : float, optional
        Level whose box the grid covers; defaults to ``level``.
    grid_spacing : float, optional
    mode : str
        Quadrature mode.
    """

    def __init__(self, level=3.0, quadrature_level=None, grid_level=None, grid_spacing=None,
                 mode="moment-exact"):
        self.level = level
        self.quadrature_level = quadrature_level
        self.grid_level = grid_level
        self.grid_spacing = grid_spacing
        self.mode = mode

    def fit(self, X, y=None):
        X = check_points(X)
        q = X.shape[1]
        qlev = self.quadrature_level or self.level
        self.quadrature_ = solve_weights(SampleSet(X, A=A_SERO, n=qlev), mode=self.mode,
                                         check_mesh=False)
        glev = self.grid_level or self.level
        self.grid_ = build_grid(glev, q, self.grid_spacing or default_spacing(glev))
        self.operator_ = assemble_operator(self.quadrature_, self.grid_, KernelSpec(self.level, q=q))
        self.n_features_in_ = X.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "operator_")
        X = check_values(X, self.operator_.shape[1])
        return self.operator_.apply(np.atleast_2d(X))


class SpikeRecovery(BaseEstimator):
    """Point-mass recovery from samples of the scaled blurred data.

    ``fit(X, y)`` takes sample points X and values y. The quadrature is
    solved at ``quadrature_level`` (default ``rho * n``). ``predict``
    evaluates the recovered blurred model at new points.

    Attributes
    ----------
    result_ : RecoveredSpikes
    centers_, amplitudes_ : ndarray
    n_spikes_ : int
    """

    def __init__(self, n=4.0, rho=1.0, mu=1.0, eta=1.0, refine="theorem",
                 amplitude_mode="normalized", rescale_mode="derived", scale_v=0.5,
                 quadrature_level=None, quadrature_mode="moment-exact", M_hint=None,
                 box_radius=None, validate_clusters=True):
        self.n = n
        self.rho = rho
        self.mu = mu
        self.eta = eta
        self.refine = refine
        self.amplitude_mode = amplitude_mode
        self.rescale_mode = rescale_mode
        self.scale_v = scale_v
        self.quadrature_level = quadrature_level
        self.quadrature_mode = quadrature_mode
        self.M_hint = M_hint
        self.box_radius = box_radius
        self.validate_clusters = validate_clusters

    def _params(self):
        return RecoveryParams(n=self.n, rho=self.rho, mu=self.mu, eta=self.eta,
                              refine=self.refine, amplitude_mode=self.amplitude_mode,
                              rescale_mode=self.rescale_mode, scale_v=self.scale_v,
                              M_hint=self.M_hint, box_radius=self.box_radius,
                              validate_clusters=self.validate_clusters)

    def _quadrature(self, X):
        level = self.quadrature_level or self.rho * self.n
        return solve_weights(SampleSet(X, A=A_SERO, n=level), mode=self.quadrature_mode,
                             check_mesh=False)

    def fit(self, X, y):
        X = check_points(X)
        y = check_values(y, X.shape[0])
        self.quadrature_ = self._quadrature(X)
        self.result_ = recover(y, self.quadrature_, self._params())
        self.centers_ = self.result_.centers
        self.amplitudes_ = self.result_.amplitudes
        self.n_spikes_ = self.result_.count
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = check_points(X, self.centers_.shape[1] if self.n_spikes_ else None)
        if self.n_spikes_ == 0:
            return np.zeros(X.shape[0])
        d2 = ((X[:, None, :] - self.centers_[None]) ** 2).sum(-1)
        return np.exp(-d2) @ self.amplitudes_

    def kernel_response(self, X):
        """Predicted level-n field sum_l a_l Phi_n(x, x_l) at X."""
        check_is_fitted(self, "result_")
        X = check_points(X)
        spec = KernelSpec(self.n, q=X.shape[1])
        return kernel_matrix(spec, X, self.centers_) @ self.amplitudes_ if self.n_spikes_ \
            else np.zeros(X.shape[0])


class ExponentialSumSeparator(SpikeRecovery):
    """Exponents and coefficients of f(y) = sum_l b_l exp(2 y_l . y).

    ``fit(X, y)`` takes sample points and values of f; ``predict`` evaluates
    the recovered exponential sum.

    Attributes
    ----------
    exponents_, coefficients_ : ndarray
    """

    def fit(self, X, y):
        X = check_points(X)
        y = check_values(y, X.shape[0])
        self.quadrature_ = self._quadrature(X)
        self.separation_ = separate_exponential_sum(self.quadrature_, y, self._params())
        self.result_ = self.separation_.spikes
        self.exponents_ = self.separation_.exponents
        self.coefficients_ = self.separation_.coefficients
        self.centers_ = self.result_.centers
        self.amplitudes_ = self.result_.amplitudes
        self.n_spikes_ = self.separation_.count
        return self

    def predict(self, X):
        check_is_fitted(self, "separation_")
        X = check_points(X)
        if self.n_spikes_ == 0:
            return np.zeros(X.shape[0])
        return np.exp(2.0 * X @ self.exponents_.T) @ self.coefficients_
