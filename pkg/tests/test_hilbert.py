"""Quadrature, bases, Gram matrices, coefficients, diagonal operators."""

import numpy as np
import pytest

from gfieldlab.errors import SpaceMismatchError
from gfieldlab.hilbert import (
    MeasureSpace,
    Basis,
    L2Element,
    cosine_basis,
    full_trig_basis,
    inner,
    gram,
    coeffs,
    reconstruct,
    parseval_defect,
    hs_apply,
    hs_identity,
    hs_one_over_n,
    HSOperator,
)

SPACE = MeasureSpace()
COS = cosine_basis(SPACE)


def refined_inner(f, g, factor=4):
    """Brute-force quadrature oracle on a factor-refined grid."""
    fine = MeasureSpace(SPACE.length, SPACE.n_quad * factor)
    return fine.quad(f(fine.grid) * g(fine.grid))


class TestInner:
    def test_orthonormality_grid_forms(self):
        e1 = L2Element.from_grid(SPACE, COS.evaluate(1, SPACE.grid))
        e2 = L2Element.from_grid(SPACE, COS.evaluate(2, SPACE.grid))
        assert inner(e1, e1) == pytest.approx(1.0, abs=1e-8)
        assert inner(e1, e2) == pytest.approx(0.0, abs=1e-8)

    def test_orthonormality_matrix(self):
        for basis in (COS, full_trig_basis(SPACE)):
            els = [basis.element(i) for i in range(6)]
            grid_els = [L2Element.from_grid(SPACE, e.on_grid()) for e in els]
            g = gram(grid_els)
            np.testing.assert_allclose(g, np.eye(6), atol=1e-8)

    def test_indicator_intersection_exact(self):
        a = L2Element.indicator(SPACE, [(0.0, np.pi)])
        b = L2Element.indicator(SPACE, [(np.pi / 2, 3 * np.pi / 2)])
        assert inner(a, b) == pytest.approx(np.pi / 2, abs=0.0)

    def test_indicator_vs_trig_closed_form(self):
        ind = L2Element.indicator(SPACE, [(0.5, 2.0)])
        e3 = COS.element(3)
        exact = (np.sin(3 * 2.0) - np.sin(3 * 0.5)) / (3 * np.sqrt(np.pi))
        assert inner(ind, e3) == pytest.approx(exact, rel=1e-14)
        # quadrature fallback agrees to quadrature tolerance
        approx = SPACE.quad(ind.on_grid() * e3.on_grid())
        assert approx == pytest.approx(exact, abs=5e-3)

    def test_space_mismatch(self):
        other = MeasureSpace(2 * np.pi, 256)
        with pytest.raises(SpaceMismatchError):
            inner(COS.element(0), cosine_basis(other).element(0))


class TestGram:
    def test_scaling_rank_one(self):
        h = COS.element(1)
        two_h = L2Element.from_coeffs(COS, np.array([0.0, 2.0]))
        g = gram([h, two_h])
        np.testing.assert_allclose(g, [[1.0, 2.0], [2.0, 4.0]], atol=1e-12)
        assert np.linalg.matrix_rank(g, tol=1e-10) == 1

    def test_vs_refined_quadrature(self):
        rng = np.random.default_rng(23)
        c1, c2 = rng.standard_normal(9), rng.standard_normal(9)

        def f(x, c=c1):
            return sum(ci * COS.evaluate(i, x) for i, ci in enumerate(c))

        def g_(x, c=c2):
            return sum(ci * COS.evaluate(i, x) for i, ci in enumerate(c))

        h = L2Element.from_grid(SPACE, f(SPACE.grid))
        k = L2Element.from_grid(SPACE, g_(SPACE.grid))
        assert inner(h, k) == pytest.approx(refined_inner(f, g_), abs=1e-6)

    def test_cauchy_schwarz(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            h = L2Element.from_coeffs(COS, rng.standard_normal(12))
            k = L2Element.from_coeffs(COS, rng.standard_normal(12))
            lhs = abs(inner(h, k))
            rhs = h.norm() * k.norm()
            assert lhs <= rhs * (1 + 1e-10)


class TestCoeffs:
    def test_basis_element_unit_vector(self):
        c = coeffs(COS.element(3), COS, 6)
        np.testing.assert_allclose(c, [0, 0, 0, 1, 0, 0], atol=1e-12)

    def test_linear_ramp_coefficients(self):
        # h(x) = x: the constant-mode coefficient is pi*sqrt(2 pi); all
        # integer-frequency cosine coefficients vanish (the even part of the
        # ramp about x = pi is constant).  Cross-check by refined quadrature.
        h = L2Element.from_grid(SPACE, SPACE.grid.copy())
        c = coeffs(h, COS, 8)
        assert c[0] == pytest.approx(np.pi * np.sqrt(2 * np.pi), rel=1e-12)
        for i in range(1, 8):
            oracle = refined_inner(lambda x: x, lambda x, i=i: COS.evaluate(i, x))
            assert c[i] == pytest.approx(oracle, abs=1e-6)
            assert abs(c[i]) < 1e-6

    def test_parseval_defect_monotone(self):
        ind = L2Element.indicator(SPACE, [(0.7, 2.9)])
        defects = [parseval_defect(ind, COS, n) for n in range(1, 40)]
        assert all(d >= -1e-12 for d in defects)
        assert all(a >= b - 1e-12 for a, b in zip(defects, defects[1:]))
        assert defects[-1] < defects[0]

    def test_full_band_defect_zero(self):
        h = L2Element.from_coeffs(COS, np.array([1.0, -2.0, 0.5]))
        assert parseval_defect(h, COS, 3) == pytest.approx(0.0, abs=1e-12)

    def test_band_limit_rejected(self):
        with pytest.raises(ValueError, match="band limit"):
            coeffs(COS.element(0), COS, COS.size_limit + 1)

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        c = rng.standard_normal(20)
        h_grid = L2Element.from_grid(
            SPACE, reconstruct(COS, c).on_grid()
        )
        back = coeffs(h_grid, COS, 20)
        np.testing.assert_allclose(back, c, atol=1e-7)
        diff = reconstruct(COS, back).on_grid() - h_grid.on_grid()
        assert SPACE.quad(diff * diff) ** 0.5 < 1e-7


class TestHSOperator:
    def test_identity_on_band_limited(self):
        q = hs_identity(10)
        f = L2Element.from_coeffs(COS, np.arange(1.0, 8.0))
        out = hs_apply(q, f, COS)
        np.testing.assert_allclose(out.coeffs[:7], f.coeffs, atol=1e-12)

    def test_eigenrelation(self):
        q = HSOperator(np.array([0.5, 0.25, 0.125]))
        out = hs_apply(q, COS.element(2), COS)
        np.testing.assert_allclose(out.coeffs, [0, 0, 0.125], atol=1e-15)

    def test_norm_identity_vs_quadrature(self):
        q = hs_one_over_n(12)
        rng = np.random.default_rng(13)
        f = L2Element.from_coeffs(COS, rng.standard_normal(12))
        image = hs_apply(q, f, COS)
        exact = float(np.sum(q.eigenvalues**2 * f.coeffs**2))
        v = image.on_grid()
        assert SPACE.quad(v * v) == pytest.approx(exact, abs=1e-7)

    def test_band_limit_violation(self):
        q = hs_identity(3)
        f = L2Element.from_coeffs(COS, np.ones(6))
        with pytest.raises(ValueError, match="band limit"):
            hs_apply(q, f, COS)

    def test_one_over_n_tail(self):
        q = hs_one_over_n(50)
        assert q.sum_sq() == pytest.approx(np.pi**2 / 6.0, rel=1e-12)
