"""Acceptance suite: one test per criterion, tolerances pinned below.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary. Criteria 6 to 9 run the recovery in theorem mode, where
the refined level follows from the estimated constants.
"""
import math
import time

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from conftest import ACCEPTANCE_LINES
from sera import io
from sera.exceptions import ConfigurationError, RecoveryError
from sera.kernels import KernelSpec, make_reference_grid, mehler_closed_form, mehler_series, mehler_special
from sera.kernels import gauss_identity_residual
from sera.operator import assemble_operator, build_grid, continuous_sero_oracle
from sera.quadrature import A_SERO, solve_weights
from sera.recovery import RecoveryParams, kernel_constants, recover, separate_exponential_sum
from sera.synthesis import TargetSpec, eval_blurred, eval_exp_sum, gen_clutter, gen_sample_points, gen_target
from sera.verify import orthonormality_error

TOL_ORTHO = 1e-8
TOL_SERIES = 1e-10
TOL_CLOSED = 1e-12
TOL_GAUSS = 1e-6
TOL_PRODUCT = 1e-6
TV_FACTOR = 3.0
TOL_GAP = 1e-4
TOL_AMP = 0.1
TOL_COEF = 0.1
SEEDS = range(20)

# criteria 6-9 use the largest quadrature that fits the memory guard at desk scale
SAMPLE_LEVEL_Q1 = 8.0
SAMPLE_LEVEL_Q2 = 3.0


def report(k, passed, detail, elapsed):
    line = f"criterion {k:2d}: {'PASS' if passed else 'FAIL'} ({elapsed:.1f}s) {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


@pytest.fixture(scope="module")
def qm8():
    return solve_weights(gen_sample_points(1, A_SERO, SAMPLE_LEVEL_Q1, seed=0), check_mesh=False)


@pytest.fixture(scope="module")
def qm2d():
    return solve_weights(gen_sample_points(2, A_SERO, SAMPLE_LEVEL_Q2, seed=0), check_mesh=False)


def theorem_params(**kw):
    return RecoveryParams(refine="theorem", rho=1.0, **kw)


def run_recovery(data, qm, params):
    """Result dict for one recovery; failures become error records."""
    try:
        r = recover(data, qm, params)
    except (RecoveryError, ConfigurationError) as exc:
        return {"error": type(exc).__name__, "message": str(exc)}
    return r.to_dict()


def spike_instance(seed):
    return gen_target(seed, 3, 1, 3.0, 2.0, (1.0, 2.0))


def check_spikes(res, target, amp_tol=TOL_AMP):
    """Return None on success, else a reason string."""
    if "error" in res:
        return f"{res['error']}: {res['message'][:160]}"
    if res["count"] != target.count:
        return f"L = {res['count']} != {target.count}"
    C = np.asarray(res["centers"]).reshape(-1, target.q)
    D = cdist(C, target.centers)
    match = D.argmin(axis=1)
    if len(set(match)) != target.count:
        return "centers do not match one-to-one"
    bound = res["diagnostics"]["localization_bound"]
    err = D[np.arange(len(match)), match]
    if np.any(err > bound):
        return f"localization {err.max():.3g} > 2 gamma / N = {bound:.3g}"
    ratio = np.asarray(res["amplitudes"]) / target.amplitudes[match]
    if np.any(np.abs(ratio - 1) > amp_tol):
        return f"amplitude error {np.abs(ratio - 1).max():.3g} > {amp_tol}"
    return None


# ---------------------------------------------------------------- criterion 1
def test_criterion_01_hermite_orthonormality():
    t0 = time.time()
    err = orthonormality_error(max_degree=30, half_width=20.0, step=1e-3)
    dt = time.time() - t0
    report(1, err <= TOL_ORTHO and dt < 10, f"max |<psi_j,psi_k> - delta| = {err:.2e}", dt)


# ---------------------------------------------------------------- criterion 2
def test_criterion_02_mehler_oracles():
    t0 = time.time()
    rng = np.random.default_rng(2)
    r = 1 / math.sqrt(3)
    series, closed = 0.0, 0.0
    for _ in range(200):
        y, z = rng.uniform(-2, 2, 2)
        cf = mehler_closed_form(1, r, y, z)
        series = max(series, abs(mehler_series(1, r, y, z, 60) - cf),
                     abs(mehler_series(1, r, y, z, 60) - mehler_special(1, y, z)))
        closed = max(closed, abs(mehler_special(1, y, z) - cf))
    dt = time.time() - t0
    report(2, series <= TOL_SERIES and closed <= TOL_CLOSED and dt < 5,
           f"series gap {series:.2e}, closed-form gap {closed:.2e}", dt)


# ---------------------------------------------------------------- criterion 3
def test_criterion_03_kernel_bridge():
    t0 = time.time()
    spec = KernelSpec(3)
    grid = make_reference_grid(spec, 0.02)
    rng = np.random.default_rng(3)
    pairs = rng.uniform(-3, 3, (20, 2))
    worst = max(gauss_identity_residual(spec, x, y, grid) for x, y in pairs)
    dt = time.time() - t0
    report(3, worst <= TOL_GAUSS and dt < 60, f"max residual {worst:.2e} over 20 pairs", dt)


# ---------------------------------------------------------------- criterion 4
def quadrature_outputs():
    out = {}
    for n in (2.0, 3.0, 4.0):
        qm = solve_weights(gen_sample_points(1, A_SERO, n, seed=0))
        out[str(n)] = qm.to_dict()
    return out


def test_criterion_04_quadrature_certificate():
    t0 = time.time()
    out = quadrature_outputs()
    res = out["3.0"]["diagnostics"]["product_orthogonality_residual"]
    tv = [out[k]["diagnostics"]["sum_abs_weights_over_nq"] for k in out]
    spread = max(tv) / min(tv)
    dt = time.time() - t0
    report(4, res <= TOL_PRODUCT and spread <= TV_FACTOR and dt < 120,
           f"product residual {res:.2e}; sum|w|/n = {', '.join(f'{v:.3f}' for v in tv)} (spread {spread:.2f})", dt)


# ---------------------------------------------------------------- criterion 5
def operator_gap_output():
    spec = KernelSpec(3)
    qm = solve_weights(gen_sample_points(1, A_SERO, 3.0, seed=0))
    grid = build_grid(3.0, 1, 1 / 6)
    op = assemble_operator(qm, grid, spec)
    x1 = 0.3
    data = np.exp(-(qm.points[:, 0] - x1) ** 2)
    inner = np.nonzero(np.abs(grid.axis) <= 2.0)[0]
    pick = inner[np.linspace(0, inner.size - 1, 20).astype(int)]
    f = lambda u: np.exp(-((u - x1) ** 2).sum(1))
    cont = continuous_sero_oracle(spec, f, grid.points[pick], make_reference_grid(spec, 0.02))
    disc = op.apply(data)[pick]
    return {"points": grid.points[pick].ravel().tolist(), "discrete": disc.tolist(),
            "continuous": cont.tolist(), "gap": float(np.abs(disc - cont).max())}


def test_criterion_05_operator_gap():
    t0 = time.time()
    out = operator_gap_output()
    dt = time.time() - t0
    report(5, out["gap"] <= TOL_GAP and dt < 120, f"max gap {out['gap']:.2e} on 20 grid points", dt)


# ---------------------------------------------------------------- criterion 6
def noise_free_outputs(qm):
    out = {}
    for seed in SEEDS:
        t = spike_instance(seed)
        data = eval_blurred(t, None, qm.points)
        out[seed] = run_recovery(data, qm, theorem_params(n=4, mu=t.mu, eta=2.0))
    return out


def test_criterion_06_noise_free_recovery(qm8):
    t0 = time.time()
    out = noise_free_outputs(qm8)
    fails = {s: check_spikes(out[s], spike_instance(s)) for s in SEEDS}
    fails = {s: why for s, why in fails.items() if why}
    dt = time.time() - t0
    first = next(iter(fails.items()), (None, ""))
    report(6, not fails and dt < 300,
           f"{len(SEEDS) - len(fails)}/{len(SEEDS)} seeds pass" + (f"; seed {first[0]}: {first[1]}" if fails else ""), dt)


# ---------------------------------------------------------------- criterion 7
def clutter_outputs(qm):
    out = {}
    for seed in SEEDS:
        t = spike_instance(seed)
        spec = KernelSpec(4)
        kc = kernel_constants(spec, min(spec.half_side, max(2.0, t.box_radius + 1.0)))
        bv = kc["A2"] * t.mu / (16 * kc["A1"])
        clutter = gen_clutter(1000 + seed, 5, 1, 3.0, bv)
        params = theorem_params(n=4, mu=t.mu, eta=2.0)
        clean = run_recovery(eval_blurred(t, None, qm.points), qm, params)
        noisy = run_recovery(eval_blurred(t, clutter, qm.points), qm, params)
        out[seed] = {"clutter_bv": bv, "clean": clean, "noisy": noisy}
    return out


def test_criterion_07_noise_robustness(qm8):
    t0 = time.time()
    out = clutter_outputs(qm8)
    ok, excused, reasons = 0, 0, []
    for seed, rec in out.items():
        noisy = rec["noisy"]
        if "error" not in noisy and noisy["count"] == spike_instance(seed).count:
            ok += 1
            continue
        suff = noisy.get("diagnostics", {}).get("sufficiency")
        if suff is not None and not suff["passed"]:
            excused += 1
        reasons.append(f"seed {seed}: " + (noisy["error"] if "error" in noisy else f"L = {noisy['count']}"))
    failures = len(out) - ok
    passed = ok >= 19 and excused == failures
    dt = time.time() - t0
    report(7, passed and dt < 300,
           f"L unchanged in {ok}/20; unexcused failures {failures - excused}"
           + (f"; {reasons[0]}" if reasons else ""), dt)


# ---------------------------------------------------------------- criterion 8
def separation_outputs(qm, qm2):
    out = {}
    f = eval_exp_sum([[-1.0], [1.0]], [1.0, -1.5], qm.points)
    # the transformed amplitudes are pi^{1/2} e |b|, so mu follows from the smaller one
    mu = math.sqrt(math.pi) * math.e * 1.0
    try:
        s = separate_exponential_sum(qm, f, theorem_params(n=4, mu=mu, eta=2.0))
        out["q1"] = s.to_dict()
    except (RecoveryError, ConfigurationError) as exc:
        out["q1"] = {"error": type(exc).__name__, "message": str(exc)}
    f2 = eval_exp_sum([[0.5, -0.5]], [1.0], qm2.points)
    mu2 = math.pi * math.exp(0.5)
    try:
        s2 = separate_exponential_sum(qm2, f2, theorem_params(n=3, mu=mu2, eta=2.0))
        out["q2"] = s2.to_dict()
    except (RecoveryError, ConfigurationError) as exc:
        out["q2"] = {"error": type(exc).__name__, "message": str(exc)}
    return out


def check_separation(res, exps, coefs):
    if "error" in res:
        return f"{res['error']}: {res['message'][:160]}"
    if res["count"] != len(coefs):
        return f"count {res['count']} != {len(coefs)}"
    E = np.asarray(res["exponents"])
    D = cdist(E, np.asarray(exps))
    match = D.argmin(axis=1)
    bound = res["spikes"]["diagnostics"]["localization_bound"]
    if np.any(D[np.arange(len(match)), match] > bound):
        return "exponent outside 2 gamma / N"
    rel = np.abs(np.asarray(res["coefficients"]) / np.asarray(coefs)[match] - 1)
    if np.any(rel > TOL_COEF):
        return f"coefficient error {rel.max():.3g}"
    return None


def test_criterion_08_exponential_sum_roundtrip(qm8, qm2d):
    t0 = time.time()
    out = separation_outputs(qm8, qm2d)
    why1 = check_separation(out["q1"], [[-1.0], [1.0]], [1.0, -1.5])
    why2 = check_separation(out["q2"], [[0.5, -0.5]], [1.0])
    dt = time.time() - t0
    report(8, why1 is None and why2 is None and dt < 300,
           f"q=1: {why1 or 'ok'}; q=2: {why2 or 'ok'}", dt)


# ---------------------------------------------------------------- criterion 9
def q2_output(qm2):
    t = TargetSpec([[-1.0, -1.0], [1.0, 1.0]], [1.4, -1.7])
    return t, run_recovery(eval_blurred(t, None, qm2.points), qm2, theorem_params(n=3, mu=1.4, eta=2.0))


def test_criterion_09_q2_recovery(qm2d):
    t0 = time.time()
    t, res = q2_output(qm2d)
    why = check_spikes(res, t, amp_tol=math.inf)
    dt = time.time() - t0
    report(9, why is None and dt < 600, why or f"L = {res['count']}, localization within bound", dt)


# --------------------------------------------------------------- criterion 10
def test_criterion_10_determinism(qm8, qm2d):
    t0 = time.time()

    def outputs():
        kernel_constants.cache_clear()
        qa = solve_weights(gen_sample_points(1, A_SERO, SAMPLE_LEVEL_Q1, seed=0), check_mesh=False)
        qb = solve_weights(gen_sample_points(2, A_SERO, SAMPLE_LEVEL_Q2, seed=0), check_mesh=False)
        fixed = {}
        for seed in range(3):
            t = spike_instance(seed)
            fixed[seed] = run_recovery(eval_blurred(t, None, qa.points), qa,
                                       RecoveryParams(n=4, rho=2, refine="fixed", mu=t.mu, eta=2.0))
        return [io.dumps(x) for x in (
            quadrature_outputs(), operator_gap_output(), noise_free_outputs(qa),
            clutter_outputs(qa), separation_outputs(qa, qb), q2_output(qb)[1], fixed)]

    a, b = outputs(), outputs()
    same = [x == y for x, y in zip(a, b)]
    dt = time.time() - t0
    report(10, all(same), f"{sum(same)}/{len(same)} JSON outputs byte-identical", dt)
