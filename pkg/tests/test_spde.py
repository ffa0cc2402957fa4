"""Green kernel identities, both solvers, mode diagnostics, weak residual."""

import numpy as np
import pytest

from gfieldlab.hilbert import L2Element
from gfieldlab.scenarios import VolBand, ScenarioPath, bang_bang_scenarios
from gfieldlab.noise import NoiseRealization, TimePartition
from gfieldlab.spde import (
    SPDEConfig,
    GOUMode,
    green_eigen,
    green_images,
    heat_semigroup,
    cosine_mode_coeffs,
    spectral_solve,
    mild_solve,
    mild_convolution_direct,
    coupling_report,
    coupling_sweep,
    make_noise,
    simulate_mode_ensemble,
    ou_cov_bound_check,
    classical_ou_cov,
    CosineTestFunction,
    weak_solution_residual,
    second_moment_sup,
    second_moment_bound,
    contraction_fixed_point,
    _spectral_coeffs,
)

BAND = VolBand(1.0, 4.0)
TWO_PI = 2.0 * np.pi


def small_cfg(**kw):
    base = dict(mass=1.0, t_end=0.5, n_modes=8, nx=32, n_slices=16)
    base.update(kw)
    return SPDEConfig(**base)


def const_scenario(theta, t_end=0.5):
    return ScenarioPath(np.array([0.0, t_end]), np.array([theta]), BAND)


def zero_noise(cfg, theta=1.0):
    return NoiseRealization(
        cfg.partition,
        cfg.basis,
        cfg.n_modes,
        const_scenario(theta, cfg.t_end),
        np.zeros((cfg.n_slices, cfg.n_modes)),
    )


class TestGreenKernel:
    def test_symmetry_exact(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            t = 10 ** rng.uniform(-3, 1)
            x, y = rng.uniform(0, TWO_PI, 2)
            assert green_eigen(t, x, y, 1.0) == green_eigen(t, y, x, 1.0)
            assert green_images(t, x, y, 1.0) == green_images(t, y, x, 1.0)

    def test_mass_identity(self):
        ys = np.linspace(0.0, TWO_PI, 8193)
        for t in (0.01, 0.1, 1.0):
            for x in (0.3, 2.0, 5.9):
                total = np.trapezoid(green_eigen(t, x, ys, 1.0), ys)
                assert total == pytest.approx(np.exp(-t), abs=1e-8)

    def test_long_time_flattens_to_constant_mode(self):
        xs = np.linspace(0.0, TWO_PI, 64)
        # remaining oscillatory content at time t is e^{-m^2 t} e^{-t}/pi
        g = green_eigen(10.0, xs[:, None], xs[None, :], 1.0)
        target = np.exp(-10.0) / TWO_PI
        assert np.abs(g - target).max() < 1e-9
        g12 = green_eigen(12.0, xs[:, None], xs[None, :], 1.0)
        assert np.abs(g12 - np.exp(-12.0) / TWO_PI).max() < 1e-10

    def test_eigen_image_duality(self):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(100):
            t = 10 ** rng.uniform(-3, 0)
            x, y = rng.uniform(0, TWO_PI, 2)
            worst = max(
                worst,
                abs(green_eigen(t, x, y, 1.0) - green_images(t, x, y, 1.0, 8)),
            )
        assert worst < 1e-10

    def test_small_time_diagonal_asymptote(self):
        # the halved reflected comb puts half a free-line Gaussian at x=y,
        # so the on-diagonal value approaches e^{-m^2 t}/(4 sqrt(pi t))
        t = 1e-3
        for x in (1.3, 2.6, 4.4):
            val = green_images(t, x, x, 1.0)
            ref = np.exp(-t) / (4.0 * np.sqrt(np.pi * t))
            assert val == pytest.approx(ref, rel=1e-8)

    def test_nonpositive_time_rejected(self):
        with pytest.raises(ValueError):
            green_eigen(0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            green_images(-0.1, 1.0, 1.0, 1.0)


class TestHeatSemigroup:
    def test_eigenfunction_decay_exact(self):
        cfg = small_cfg()
        e1 = cfg.basis.element(1)
        out = heat_semigroup(e1, 0.3, cfg)
        expect = np.exp(-(1.0 + 1.0) * 0.3)
        assert out.coeffs[1] == pytest.approx(expect, rel=1e-14)
        assert np.abs(np.delete(out.coeffs, 1)).max() == 0.0

    def test_matches_kernel_quadrature(self):
        cfg = small_cfg()
        rng = np.random.default_rng(3)
        c = np.zeros(cfg.n_modes)
        c[:5] = rng.standard_normal(5)
        psi = L2Element.from_coeffs(cfg.basis, c)
        t = 0.2
        out = heat_semigroup(psi, t, cfg)
        ys = np.linspace(0.0, TWO_PI, 4097)
        psi_y = psi.on_grid() if False else None
        vals_psi = sum(
            c[n] * cfg.basis.evaluate(n, ys) for n in range(cfg.n_modes)
        )
        for x in (0.7, 3.1):
            quad = np.trapezoid(green_eigen(t, x, ys, cfg.mass) * vals_psi, ys)
            direct = sum(
                out.coeffs[n] * cfg.basis.evaluate(n, np.array([x]))[0]
                for n in range(cfg.n_modes)
            )
            assert quad == pytest.approx(direct, abs=1e-7)

    def test_time_zero_identity(self):
        cfg = small_cfg()
        c = np.arange(1.0, cfg.n_modes + 1)
        out = heat_semigroup(c, 0.0, cfg)
        np.testing.assert_allclose(out.coeffs, c, rtol=0.0)

    def test_sine_content_rejected(self):
        cfg = small_cfg()
        bad = L2Element.from_grid(cfg.space, np.sin(cfg.space.grid))
        with pytest.raises(ValueError, match="cosine"):
            heat_semigroup(bad, 0.1, cfg)


class TestSpectralSolve:
    def test_zero_noise_pure_decay(self):
        cfg = small_cfg(t_end=0.5, n_slices=10)
        psi = np.zeros(cfg.n_modes)
        psi[1] = 1.0  # drift a = -(1 + 1) = -2
        path = spectral_solve(psi, zero_noise(cfg), cfg)
        assert path.mode(1)[-1] == pytest.approx(np.exp(-1.0), rel=1e-12)
        assert np.abs(path.coeffs[:, 2:]).max() == 0.0

    def test_mode_mean_matches_exponential(self):
        part = TimePartition.uniform(0.5, 16)
        mode = GOUMode(index=1, drift=-2.0, psi0=1.5)
        grid = np.linspace(0.0, 0.5, 5)
        for scen in bang_bang_scenarios(grid, BAND, limit=4):
            paths = simulate_mode_ensemble(mode, scen, part, 40_000, seed=5)
            for l in (4, 8, 16):
                t = part.times[l]
                se = paths[:, l].std(ddof=1) / np.sqrt(len(paths))
                assert abs(paths[:, l].mean() - 1.5 * np.exp(-2.0 * t)) < 3 * se

    def test_degenerate_band_matches_classical_ou_cov(self):
        band = VolBand(2.0, 2.0)
        part = TimePartition.uniform(1.0, 64)
        sc = ScenarioPath(np.array([0.0, 1.0]), np.array([2.0]), band)
        mode = GOUMode(index=1, drift=-2.0, psi0=0.0)
        paths = simulate_mode_ensemble(mode, sc, part, 60_000, seed=6)
        for ls, lt in ((16, 48), (32, 32)):
            s, t = part.times[ls], part.times[lt]
            prod = paths[:, ls] * paths[:, lt]
            se = prod.std(ddof=1) / np.sqrt(len(prod))
            target = classical_ou_cov(s, t, 2.0, -2.0)
            assert abs(prod.mean() - target) < 5 * se


class TestMildSolve:
    def test_zero_noise_matches_semigroup(self):
        cfg = small_cfg()
        psi = np.zeros(cfg.n_modes)
        psi[0], psi[2] = 1.0, -0.5
        mild = mild_solve(psi, zero_noise(cfg), cfg)
        decay = heat_semigroup(psi, cfg.t_end, cfg).coeffs
        np.testing.assert_allclose(mild.coeffs[-1], decay, atol=1e-13)

    def test_single_slice_closed_form(self):
        cfg = small_cfg(n_slices=1, t_end=0.1)
        noise = make_noise(const_scenario(4.0, 0.1), cfg, seed=7)
        mild = mild_solve(None, noise, cfg).on_grid()[-1]
        # in-slice midpoint closed form, exact modes
        weights = np.exp(cfg.drifts * 0.05)
        modes = weights * noise.increments[0]
        e = cfg.basis_matrix()
        closed = modes @ e
        scale = np.abs(closed).max()
        assert np.abs(mild - closed).max() < 1e-2 * scale

    def test_fast_path_equals_direct_double_sum(self):
        cfg = small_cfg(n_slices=6, nx=24)
        noise = make_noise(const_scenario(2.5, 0.5), cfg, seed=8)
        mild = mild_solve(None, noise, cfg)
        x = cfg.grid_x
        for l in (1, 3, 6):
            direct = mild_convolution_direct(noise, cfg, l, x)
            fast = mild.on_grid()[l]
            np.testing.assert_allclose(fast, direct, atol=1e-10)

    def test_coupling_small(self):
        cfg = small_cfg(n_modes=16, nx=64, n_slices=32)
        noise = make_noise(const_scenario(4.0, 0.5), cfg, seed=9)
        rep = coupling_report(None, noise, cfg)
        assert rep.rel_sup_diff < 1e-2
        assert rep.sup_field > 0


class TestOUCovBound:
    def test_equality_at_band_top_diagonal(self):
        part = TimePartition.uniform(1.0, 20)
        mode = GOUMode(index=1, drift=-2.0)
        rep = ou_cov_bound_check(
            mode, 0.5, 0.5, BAND, [const_scenario(4.0, 1.0)], part, 60_000, seed=10
        )
        assert rep.passed
        # at s = t under the top scenario the bound is attained
        assert rep.sup_estimate == pytest.approx(rep.bound, abs=5 * rep.std_error)

    def test_zero_time_trivial(self):
        part = TimePartition.uniform(1.0, 10)
        mode = GOUMode(index=1, drift=-2.0)
        rep = ou_cov_bound_check(
            mode, 0.0, 0.7, BAND, [const_scenario(4.0, 1.0)], part, 5_000, seed=11
        )
        assert rep.bound >= 0.0
        assert rep.sup_estimate == pytest.approx(0.0, abs=1e-12)
        assert rep.passed

    def test_bang_bang_sweep(self):
        part = TimePartition.uniform(1.0, 10)
        mode = GOUMode(index=1, drift=-2.0)
        grid = np.linspace(0.0, 1.0, 6)
        scen = bang_bang_scenarios(grid, BAND, limit=16)
        rep = ou_cov_bound_check(mode, 0.3, 0.7, BAND, scen, part, 20_000, seed=12)
        assert rep.passed


class TestWeakResidual:
    def make_test_fn(self, mode, freq=1.0):
        amp = lambda t, f=freq: float(np.cos(f * t) + 2.0)  # noqa: E731
        damp = lambda t, f=freq: float(-f * np.sin(f * t))  # noqa: E731
        return CosineTestFunction(modes=(mode,), amps=(amp,), damps=(damp,))

    def test_zero_test_function(self):
        cfg = small_cfg()
        noise = make_noise(const_scenario(4.0, 0.5), cfg, seed=13)
        path = spectral_solve(None, noise, cfg)
        fn = CosineTestFunction(modes=(), amps=())
        assert weak_solution_residual(path, noise, fn, cfg) == 0.0

    def test_deterministic_residual_small(self):
        cfg = small_cfg(n_slices=64, n_modes=8)
        psi = np.zeros(cfg.n_modes)
        psi[1] = 1.0
        noise = zero_noise(cfg)
        path = spectral_solve(psi, noise, cfg)
        res = weak_solution_residual(path, noise, self.make_test_fn(1), cfg)
        assert res < 1e-4

    def test_noisy_residual_at_default_resolution(self):
        cfg = small_cfg(n_modes=16, nx=64, n_slices=64)
        noise = make_noise(const_scenario(4.0, 0.5), cfg, seed=14)
        psi = np.zeros(cfg.n_modes)
        psi[0], psi[2] = 0.5, 1.0
        path = spectral_solve(psi, noise, cfg)
        for mode in (0, 1, 2):
            res = weak_solution_residual(path, noise, self.make_test_fn(mode), cfg)
            assert res < 1e-3

    def test_residual_decreases_under_refinement(self):
        fn = self.make_test_fn(1)
        med = []
        for k, slices in enumerate((16, 32, 64, 128)):
            cfg = small_cfg(n_modes=8, n_slices=slices)
            vals = []
            for p in range(5):
                noise = make_noise(const_scenario(4.0, 0.5), cfg, seed=40 + p)
                path = spectral_solve(None, noise, cfg)
                vals.append(weak_solution_residual(path, noise, fn, cfg))
            med.append(np.median(vals))
        dts = 0.5 / np.array([16, 32, 64, 128])
        order = np.polyfit(np.log(dts), np.log(med), 1)[0]
        assert med[-1] < med[0]
        assert order > 0.7  # contracts at least linearly in dt

    def test_profile_projection_rejects_sine(self):
        cfg = small_cfg()
        with pytest.raises(ValueError, match="boundary"):
            CosineTestFunction.from_profile(
                lambda t, x: np.sin(x) * (1 + t), cfg
            )

    def test_profile_projection_accepts_cosine(self):
        cfg = small_cfg()
        fn = CosineTestFunction.from_profile(
            lambda t, x: np.cos(2 * x) * (1.0 + t), cfg
        )
        assert fn.modes == (2,)

    def test_band_violation_rejected(self):
        cfg = small_cfg(n_modes=4)
        noise = zero_noise(cfg)
        path = spectral_solve(None, noise, cfg)
        with pytest.raises(ValueError, match="band"):
            weak_solution_residual(path, noise, self.make_test_fn(5), cfg)


class TestSecondMoment:
    def test_zero_initial_below_mode_sum_bound(self):
        cfg = small_cfg(n_modes=16, nx=48, n_slices=16)
        grid = np.linspace(0.0, 0.5, 3)
        scen = bang_bang_scenarios(grid, BAND)
        rep = second_moment_sup(None, BAND, scen, cfg, n_paths=4000, seed=15)
        assert rep.passed
        assert rep.empirical_sup > 0

    def test_zero_noise_sup_is_decayed_initial_field(self):
        band0 = VolBand(0.0, 0.0)
        cfg = small_cfg(n_modes=8, nx=64, n_slices=8)
        sc = ScenarioPath(np.array([0.0, 0.5]), np.array([0.0]), band0)
        psi = np.zeros(cfg.n_modes)
        psi[1] = 1.0
        rep = second_moment_sup(psi, band0, [sc], cfg, n_paths=16, seed=16)
        # field is deterministic: sup of (e^{-2t} e_1(x))^2 = 1/pi at t=0;
        # the variance estimator has a ~1e-9 cancellation floor
        assert rep.empirical_sup == pytest.approx(1.0 / np.pi, rel=1e-12)
        assert rep.std_error == pytest.approx(0.0, abs=1e-6)

    def test_bound_formula_at_stationarity(self):
        cfg = small_cfg(n_modes=16)
        b = second_moment_bound(np.zeros(16), np.array([50.0]), cfg, 4.0)
        manual = 4.0 / (2 * 1.0) / TWO_PI + sum(
            4.0 / (2 * (n**2 + 1)) / np.pi for n in range(1, 16)
        )
        assert b[0] == pytest.approx(manual, rel=1e-12)

    def test_mode_growth_stabilizes(self):
        # common random numbers across truncations: draw at the largest
        # mode count, truncate for the smaller runs
        t_end, m_slices, n_paths = 0.5, 16, 800
        part = TimePartition.uniform(t_end, m_slices)
        sc = const_scenario(4.0, t_end)
        from gfieldlab.noise import sample_noise_ensemble, slice_thetas
        from gfieldlab.hilbert import MeasureSpace, cosine_basis

        space = MeasureSpace(TWO_PI, 4096)
        basis = cosine_basis(space)
        n_big = 1024
        inc = sample_noise_ensemble(part, basis, n_big, sc, n_paths, seed=17)
        xs = np.linspace(0.0, TWO_PI, 33)
        sups = []
        for n_modes in (512, 768, 1024):
            cfg = SPDEConfig(
                mass=1.0, t_end=t_end, n_modes=n_modes, nx=33,
                n_slices=m_slices, n_quad=4096,
            )
            coeffs = _spectral_coeffs(
                np.zeros(n_modes), inc[:, :, :n_modes], cfg
            )
            e = cfg.basis_matrix(xs)
            mean_sq = np.zeros((m_slices + 1, len(xs)))
            for p0 in range(0, n_paths, 200):
                f = coeffs[p0:p0 + 200] @ e
                mean_sq += (f**2).sum(axis=0)
            sups.append(float((mean_sq / n_paths).max()))
        assert abs(sups[2] - sups[1]) < 1e-3
        assert abs(sups[1] - sups[0]) < 1e-3


class TestContraction:
    def test_converges_to_closed_form(self):
        part = TimePartition.uniform(0.5, 64)
        mode = GOUMode(index=1, drift=-2.0, psi0=1.0)
        sc = const_scenario(4.0, 0.5)
        from gfieldlab.noise import sample_noise_ensemble
        from gfieldlab.hilbert import MeasureSpace, cosine_basis

        basis = cosine_basis(MeasureSpace())
        inc = sample_noise_ensemble(part, basis, 1, sc, 32, seed=18)[:, :, 0]
        rep = contraction_fixed_point(mode, inc, part, tol=1e-8, max_iter=30)
        assert rep.converged
        assert rep.iterations_to_tol <= 30
        assert rep.distances[-1] <= 1e-8
        # strictly decreasing once the iteration is underway
        assert all(
            a >= b for a, b in zip(rep.distances[1:], rep.distances[2:])
        )


class TestCouplingSweep:
    def test_two_level_smoke(self):
        cfg = small_cfg(n_modes=16, nx=48, n_slices=16)
        sweep = coupling_sweep(
            None, const_scenario(4.0, 0.5), cfg, levels=2, n_paths=2, seed=19
        )
        assert len(sweep.median_gaps) == 2
        assert sweep.median_gaps[1] < sweep.median_gaps[0]
