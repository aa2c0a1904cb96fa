import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_hermite, gammaln

from sera.exceptions import DomainError
from sera.hermite import (CutoffSpec, MultiIndex, cutoff_H, hermite_1d_all, hermite_functions,
                          hermite_multi, multi_hermite_basis, total_degree_indices)
from sera.verify import orthonormality_error

PI_M14 = math.pi ** -0.25


def psi_scipy(j, x):
    # physicists' polynomial with explicit normalization, fine for moderate j and x
    lognorm = -0.5 * (j * math.log(2) + gammaln(j + 1)) - 0.25 * math.log(math.pi)
    return eval_hermite(j, x) * np.exp(lognorm - x * x / 2)


def psi_mp(j, x):
    mpmath.mp.dps = 50
    x = mpmath.mpf(x)
    h = mpmath.hermite(j, x)
    return float(h * mpmath.exp(-x * x / 2) / mpmath.sqrt(2 ** j * mpmath.factorial(j) * mpmath.sqrt(mpmath.pi)))


class TestHermite1D:
    def test_psi0_at_origin(self):
        np.testing.assert_allclose(hermite_1d_all(0, 0.0), [0.7511255444649425], rtol=0, atol=1e-15)

    def test_psi1_vanishes_at_origin(self):
        assert hermite_1d_all(1, 0.0)[1] == 0.0

    def test_psi2_at_origin(self):
        assert hermite_1d_all(2, 0.0)[2] == pytest.approx(-PI_M14 / math.sqrt(2), abs=1e-15)
        assert hermite_1d_all(2, 0.0)[2] == pytest.approx(-0.531126, abs=1e-6)

    def test_matches_scipy_polynomials(self):
        x = np.linspace(-6, 6, 121)
        P = hermite_functions(40, x)
        for j in range(41):
            np.testing.assert_allclose(P[j], psi_scipy(j, x), rtol=1e-10, atol=1e-13)

    @pytest.mark.parametrize("j,x", [(0, 30.0), (50, 25.0), (200, 5.0), (400, 35.0), (700, 38.0)])
    def test_tails_against_mpmath(self, j, x):
        got = hermite_functions(j, x)[j]
        want = psi_mp(j, x)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-300)

    def test_far_tail_underflows_to_zero_not_nan(self):
        v = hermite_functions(5, 60.0)
        assert np.all(np.isfinite(v))

    def test_shape_and_broadcasting(self):
        x = np.zeros((3, 4))
        assert hermite_functions(5, x).shape == (6, 3, 4)

    def test_orthonormality(self):
        assert orthonormality_error(30) <= 1e-8

    def test_rejects_bad_input(self):
        with pytest.raises(DomainError):
            hermite_functions(-1, 0.0)
        with pytest.raises(DomainError):
            hermite_functions(3, np.nan)
        with pytest.raises(DomainError):
            hermite_1d_all(3, [0.0, 1.0])

    @given(st.floats(-20, 20), st.integers(0, 60))
    @settings(max_examples=60, deadline=None)
    def test_parity(self, x, j):
        a = hermite_functions(j, x)[j]
        b = hermite_functions(j, -x)[j]
        assert b == pytest.approx((-1) ** j * a, rel=1e-12, abs=1e-300)

    @given(st.floats(-10, 10), st.integers(1, 80))
    @settings(max_examples=60, deadline=None)
    def test_derivative_relation(self, x, j):
        # psi_j' = sqrt(j/2) psi_{j-1} - sqrt((j+1)/2) psi_{j+1}, checked by central differences
        h = 1e-5
        P = hermite_functions(j + 1, np.array([x - h, x, x + h]))
        fd = (P[j, 2] - P[j, 0]) / (2 * h)
        exact = math.sqrt(j / 2) * P[j - 1, 1] - math.sqrt((j + 1) / 2) * P[j + 1, 1]
        assert fd == pytest.approx(exact, abs=1e-6)


class TestMulti:
    def test_product_at_origin(self):
        assert hermite_multi((0, 0), (0.0, 0.0)) == pytest.approx(1 / math.sqrt(math.pi), abs=1e-15)
        assert hermite_multi(MultiIndex((0, 0)), (0.0, 0.0)) == pytest.approx(0.564190, abs=1e-6)

    @pytest.mark.parametrize("a", [-3.0, 0.0, 0.7, 5.0])
    def test_odd_factor_vanishes(self, a):
        assert hermite_multi((1, 0), (0.0, a)) == 0.0

    def test_one_dimensional_case(self):
        assert hermite_multi((2,), (0.0,)) == pytest.approx(-0.531126, abs=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            hermite_multi((1, 2), (0.0,))

    def test_multiindex_norms(self):
        k = MultiIndex((3, 0, 2))
        assert (k.q, k.one_norm, k.inf_norm) == (3, 5, 3)
        with pytest.raises(DomainError):
            MultiIndex((1, -1))

    @pytest.mark.parametrize("q,d", [(1, 5), (2, 6), (3, 4)])
    def test_total_degree_count_and_order(self, q, d):
        idx = total_degree_indices(q, d)
        assert len(idx) == math.comb(d + q, q)
        deg = idx.sum(1)
        assert np.all(np.diff(deg) >= 0)
        assert len({tuple(r) for r in idx}) == len(idx)
        assert not idx.flags.writeable

    def test_basis_matches_pointwise(self, rng):
        idx = total_degree_indices(2, 5)
        x = rng.normal(size=(7, 2))
        B = multi_hermite_basis(idx, x, scale=1.3)
        for r, k in enumerate(idx):
            for c in range(7):
                assert B[r, c] == pytest.approx(hermite_multi(k, 1.3 * x[c]), rel=1e-13, abs=1e-15)


class TestCutoff:
    spec = CutoffSpec()

    def test_plateaus_and_midpoint(self):
        assert cutoff_H(self.spec, 0.25) == 1.0
        assert cutoff_H(self.spec, 1.5) == 0.0
        assert cutoff_H(self.spec, 0.75) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("shape", ["exp", "exp2"])
    def test_monotone_and_bounded(self, shape):
        t = np.linspace(0, 2, 4001)
        h = cutoff_H(CutoffSpec(shape=shape), t)
        assert np.all((h >= 0) & (h <= 1))
        assert np.all(np.diff(h) <= 1e-15)
        assert np.all(h[t <= 0.5] == 1) and np.all(h[t >= 1] == 0)

    @given(st.floats(0, 0.5))
    def test_symmetry(self, s):
        a = cutoff_H(self.spec, 0.75 - s / 2)
        b = cutoff_H(self.spec, 0.75 + s / 2)
        assert a + b == pytest.approx(1.0, abs=1e-14)

    def test_callable_and_errors(self):
        assert self.spec(0.1) == 1.0
        with pytest.raises(DomainError):
            cutoff_H(self.spec, -0.1)
        with pytest.raises(DomainError):
            CutoffSpec(shape="tanh")
        with pytest.raises(DomainError):
            CutoffSpec(1.0, 0.5)
