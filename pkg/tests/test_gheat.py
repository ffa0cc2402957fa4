"""Nonlinear-PDE distributional oracle vs closed forms and quadrature."""

import numpy as np
import pytest

from gfieldlab.scenarios import VolBand, GFunction
from gfieldlab.gheat import (
    PayoffSpec,
    PDEGrid,
    solve_gheat_1d,
    solve_gheat_2d,
    gnormal_abs_moment,
)

BAND = VolBand(1.0, 4.0)


def gauss_expectation(fn, variance, n=24001, width=12.0):
    """Classical E[fn(N(0, variance))] by dense trapezoid quadrature."""
    s = np.sqrt(variance)
    x = np.linspace(-width * s, width * s, n)  # odd n keeps 0 on the grid
    density = np.exp(-(x**2) / (2.0 * variance)) / (s * np.sqrt(2.0 * np.pi))
    return float(np.trapezoid(fn(x) * density, x))


@pytest.fixture(scope="module")
def grid_1d():
    return PDEGrid.auto(BAND, T=1.0, dim=1, nx=481)


class TestSolve1D:
    def test_second_moment(self, grid_1d):
        val = solve_gheat_1d(BAND, PayoffSpec(lambda x: x**2, 2), 1.0, grid_1d)
        assert val == pytest.approx(4.0, abs=1e-2)

    def test_odd_payoff_zero(self, grid_1d):
        val = solve_gheat_1d(BAND, PayoffSpec(lambda x: x, 1), 1.0, grid_1d)
        assert val == pytest.approx(0.0, abs=1e-3)

    def test_abs_first_moment(self, grid_1d):
        val = solve_gheat_1d(BAND, PayoffSpec(np.abs, 1), 1.0, grid_1d)
        assert val == pytest.approx(2.0 * np.sqrt(2.0 / np.pi), abs=1e-2)

    def test_concave_square_uses_band_floor(self, grid_1d):
        val = solve_gheat_1d(BAND, PayoffSpec(lambda x: -(x**2), 2), 1.0, grid_1d)
        assert val == pytest.approx(-1.0, abs=1e-2)

    def test_degenerate_band_matches_quadrature(self):
        band = VolBand(2.5, 2.5)
        # degree-4 payoffs need both error terms (dt bias, h^2 truncation)
        # individually under the 1e-3 gate
        grid = PDEGrid.auto(band, T=1.0, dim=1, nx=1281, safety=0.4)
        for fn, deg in [
            (lambda x: x**2, 2),
            (lambda x: x**4 - x**3 + 2 * x, 4),
            (lambda x: x**3, 3),
        ]:
            pde = solve_gheat_1d(band, PayoffSpec(fn, deg), 1.0, grid)
            exact = gauss_expectation(fn, 2.5)
            assert pde == pytest.approx(exact, abs=1e-3)

    def test_convexity_attainment(self, grid_1d):
        convex = lambda x: np.maximum(x - 1.0, 0.0)  # noqa: E731
        pde = solve_gheat_1d(BAND, PayoffSpec(convex, 1), 1.0, grid_1d)
        classical_hi = gauss_expectation(convex, BAND.sigma_hi2)
        assert pde == pytest.approx(classical_hi, abs=1e-2)
        concave = lambda x: -np.abs(x)  # noqa: E731
        pde = solve_gheat_1d(BAND, PayoffSpec(concave, 1), 1.0, grid_1d)
        classical_lo = gauss_expectation(concave, BAND.sigma_lo2)
        assert pde == pytest.approx(classical_lo, abs=1e-2)

    def test_moment_consistency_with_closed_form(self):
        grid = PDEGrid.auto(BAND, T=1.0, dim=1, nx=961)
        for k in (1, 2, 3, 4):
            payoff = PayoffSpec(lambda x, k=k: np.abs(x) ** k, k)
            pde = solve_gheat_1d(BAND, payoff, 1.0, grid)
            closed = gnormal_abs_moment(BAND, 1.0, k, "upper")
            assert pde == pytest.approx(closed, abs=1e-2), f"k={k}"

    def test_richardson_error_reduction(self):
        # halving dx (and dt/4 via the CFL-proportional auto rule) should
        # cut the error against the closed form by roughly 4x
        payoff = PayoffSpec(lambda x: x**4, 4)
        exact = gnormal_abs_moment(BAND, 1.0, 4, "upper")
        coarse = PDEGrid.auto(BAND, T=1.0, dim=1, nx=241)
        fine = PDEGrid.auto(BAND, T=1.0, dim=1, nx=481)
        e_coarse = abs(solve_gheat_1d(BAND, payoff, 1.0, coarse) - exact)
        e_fine = abs(solve_gheat_1d(BAND, payoff, 1.0, fine) - exact)
        assert e_coarse / e_fine == pytest.approx(4.0, rel=0.5)

    def test_cfl_violation_rejected(self, grid_1d):
        bad = PDEGrid(grid_1d.half_width, grid_1d.nx, grid_1d.dt * 10, 1.0)
        with pytest.raises(ValueError, match="CFL"):
            solve_gheat_1d(BAND, PayoffSpec(lambda x: x**2, 2), 1.0, bad)

    def test_truncation_rule_enforced(self):
        with pytest.raises(ValueError, match="half_width"):
            PDEGrid(2.0, 201, 1e-5, 1.0).validate(BAND, dim=1)


@pytest.fixture(scope="module")
def grid_2d():
    return PDEGrid.auto(BAND, T=1.0, dim=2, nx=161)


class TestSolve2D:
    def test_orthogonal_product_vanishes(self, grid_2d):
        gf = GFunction(np.eye(2), BAND)
        val = solve_gheat_2d(gf, PayoffSpec(lambda x, y: x * y, 2), 1.0, grid_2d)
        assert val == pytest.approx(0.0, abs=1e-2)

    def test_positive_correlation_product(self, grid_2d):
        gf = GFunction(np.array([[1.0, 0.5], [0.5, 1.0]]), BAND)
        val = solve_gheat_2d(gf, PayoffSpec(lambda x, y: x * y, 2), 1.0, grid_2d)
        assert val == pytest.approx(0.5 * BAND.sigma_hi2, abs=2e-2)

    def test_negative_correlation_product(self, grid_2d):
        gf = GFunction(np.array([[1.0, -0.5], [-0.5, 1.0]]), BAND)
        val = solve_gheat_2d(gf, PayoffSpec(lambda x, y: x * y, 2), 1.0, grid_2d)
        assert val == pytest.approx(-0.5 * BAND.sigma_lo2, abs=2e-2)

    def test_marginal_consistency_with_1d(self, grid_2d, grid_1d):
        gf = GFunction(np.array([[1.0, 0.3], [0.3, 1.0]]), BAND)
        two_d = solve_gheat_2d(gf, PayoffSpec(lambda x, y: x**2, 2), 1.0, grid_2d)
        one_d = solve_gheat_1d(BAND, PayoffSpec(lambda x: x**2, 2), 1.0, grid_1d)
        assert two_d == pytest.approx(one_d, abs=2e-2)

    def test_gram_shape_validation(self, grid_2d):
        gf = GFunction(np.eye(3), BAND)
        with pytest.raises(ValueError):
            solve_gheat_2d(gf, PayoffSpec(lambda x, y: x * y, 2), 1.0, grid_2d)


class TestClosedFormMoments:
    def test_even_upper(self):
        assert gnormal_abs_moment(BAND, 1.0, 2, "upper") == pytest.approx(4.0)
        assert gnormal_abs_moment(BAND, 1.0, 4, "upper") == pytest.approx(48.0)

    def test_odd_lower(self):
        assert gnormal_abs_moment(BAND, 1.0, 1, "lower") == pytest.approx(
            2.0 / np.sqrt(2.0 * np.pi)
        )

    def test_matches_quadrature_oracle(self):
        for k in (1, 2, 3, 4):
            upper = gnormal_abs_moment(BAND, 1.0, k, "upper")
            oracle = gauss_expectation(lambda x, k=k: np.abs(x) ** k, BAND.sigma_hi2)
            assert upper == pytest.approx(oracle, rel=1e-6)

    def test_zero_norm(self):
        for k in (1, 2, 5):
            assert gnormal_abs_moment(BAND, 0.0, k, "upper") == 0.0

    def test_k_zero_rejected(self):
        with pytest.raises(ValueError):
            gnormal_abs_moment(BAND, 1.0, 0, "upper")

    def test_scaling_in_norm(self):
        # |c h| moments scale like c^k
        a = gnormal_abs_moment(BAND, 2.0, 3, "upper")
        b = gnormal_abs_moment(BAND, 1.0, 3, "upper")
        assert a == pytest.approx(8.0 * b)
