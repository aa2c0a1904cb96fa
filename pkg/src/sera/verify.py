"""Oracle suite: closed forms and cross-checks with measured values."""
from __future__ import annotations

import math

import numpy as np

from .hermite import hermite_functions
from .kernels import (KernelSpec, gauss_identity_residual, make_reference_grid, mehler_closed_form,
                      mehler_series, mehler_special)
from .operator import assemble_operator, build_grid, continuous_sero_oracle
from .quadrature import A_SERO, solve_weights
from .synthesis import gen_sample_points

DEFAULT_TOLERANCES = {
    "hermite_orthonormality": 1e-8,
    "mehler_series": 1e-10,
    "mehler_special": 1e-12,
    "gauss_identity": 1e-6,
    "product_orthogonality": 1e-6,
    "operator_gap": 1e-4,
}


def orthonormality_error(max_degree=30, half_width=20.0, step=1e-3):
    """max_{j,k} |trapezoid integral of psi_j psi_k - delta_jk|."""
    x = np.arange(-half_width, half_width + step / 2, step)
    P = hermite_functions(max_degree, x)
    w = np.full(x.size, step)
    w[0] = w[-1] = step / 2
    G = (P * w) @ P.T
    return float(np.abs(G - np.eye(max_degree + 1)).max())


def _pairs(rng, count, q, radius):
    return rng.uniform(-radius, radius, (count, 2, q))


def run_checks(q=1, n=3.0, seed=0, tolerances=None, pairs=20, grid_spacing=0.02):
    """Run every oracle check and return a report dict.

    Each item holds the measured value, its tolerance and a pass flag.
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    rng = np.random.default_rng(seed)
    items = []

    def add(name, value, detail=None):
        entry = {"name": name, "value": float(value), "tolerance": float(tol[name]),
                 "passed": bool(value <= tol[name])}
        if detail:
            entry["detail"] = detail
        items.append(entry)

    add("hermite_orthonormality", orthonormality_error())

    r = 1 / math.sqrt(3)
    yz = _pairs(rng, pairs, q, 2.0)
    series_err = max(abs(mehler_series(q, r, y, z) - mehler_closed_form(q, r, y, z)) for y, z in yz)
    add("mehler_series", series_err, {"r": r, "max_degree": 60})
    special_err = max(abs(mehler_special(q, y, z) - mehler_closed_form(q, r, y, z)) for y, z in yz)
    add("mehler_special", special_err)

    spec = KernelSpec(n, q=q)
    ref = make_reference_grid(spec, grid_spacing)
    xy = _pairs(rng, pairs, q, 2.0)
    gauss = max(gauss_identity_residual(spec, x, y, ref) for x, y in xy)
    add("gauss_identity", gauss, {"pairs": pairs, "spacing": grid_spacing})

    samples = gen_sample_points(q, A_SERO, n, seed=seed)
    qm = solve_weights(samples, check_mesh=False)
    add("product_orthogonality", qm.diagnostics["product_orthogonality_residual"],
        {"n_points": len(samples), "sum_abs_weights": qm.diagnostics["sum_abs_weights"]})

    x1 = np.full(q, 0.3)
    data = np.exp(-((samples.points - x1) ** 2).sum(1))
    grid = build_grid(n, q, 0.5 / n)
    op = assemble_operator(qm, grid, spec)
    inner = np.nonzero(np.abs(grid.points).max(axis=1) <= 2.0)[0]
    pick = inner[np.linspace(0, inner.size - 1, 20).astype(int)]
    xs = grid.points[pick]
    discrete = op.apply(data)[pick]
    cont = continuous_sero_oracle(spec, lambda u: np.exp(-((u - x1) ** 2).sum(1)), xs, ref)
    add("operator_gap", float(np.abs(discrete - cont).max()), {"grid_points": 20})

    return {"q": q, "n": n, "seed": seed, "items": items,
            "passed": all(i["passed"] for i in items)}
