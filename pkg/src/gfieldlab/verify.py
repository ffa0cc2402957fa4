"""Verification checks keyed to the acceptance catalogue (A01..A15).

Each check returns a CheckResult whose measured/target/tolerance columns
carry the binding sub-measurement (the worst case over the check's
internal sweep).  The same functions back the pytest acceptance module and
the CLI `verify` subcommand, so the two surfaces cannot drift apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .config import RunConfig
from .scenarios import (
    VolBand,
    ScenarioPath,
    bang_bang_scenarios,
    constant_scenario,
    check_compatibility,
    chebyshev_capacity_check,
    gnormal_terminal_sampler,
    sup_expectation,
)
from .gheat import PayoffSpec, PDEGrid, solve_gheat_1d, solve_gheat_2d, gnormal_abs_moment
from .scenarios import GFunction
from .hilbert import (
    MeasureSpace,
    Basis,
    L2Element,
    cosine_basis,
    full_trig_basis,
    hs_one_over_n,
)
from .field import SetFamily, expansion_surrogate, union_identity_check
from .noise import (
    TimePartition,
    ElementaryField,
    sample_noise_ensemble,
    integrate_elementary_ensemble,
    integrate_idgbm_ensemble,
    isometry_report,
    norm_process_ensemble,
)
from .spde import (
    SPDEConfig,
    GOUMode,
    green_eigen,
    green_images,
    coupling_sweep,
    simulate_mode_ensemble,
    classical_ou_cov,
    CosineTestFunction,
    weak_solution_residual,
    spectral_solve,
    make_noise,
    second_moment_sup,
    contraction_fixed_point,
)

Array = np.ndarray


@dataclass(frozen=True)
class CheckResult:
    id: str
    subject: str
    measured: float
    target: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.id} {self.subject}: measured={self.measured:.6g} "
            f"target={self.target:.6g} tol={self.tolerance:.3g} {self.detail}"
        )


def _two_sided(measured: float, target: float, tol: float, label: str) -> tuple:
    """Row for an |measured - target| <= tol gate, keyed by its slack."""
    return (tol - abs(measured - target), measured, target, tol, label)


def _one_sided(measured: float, bound: float, tol: float, label: str) -> tuple:
    """Row for a measured <= bound + tol gate, keyed by its slack."""
    return (bound + tol - measured, measured, bound, tol, label)


def _worst(rows: list[tuple]) -> tuple:
    """The sub-measurement with the smallest slack (negative = violated)."""
    slack, measured, target, tol, label = min(rows, key=lambda r: r[0])
    return measured, target, tol, label


# ---------------------------------------------------------------------------
# A01  moments: PDE oracle vs closed forms
# ---------------------------------------------------------------------------

_pde_cache: dict = {}


def _solve_1d_cached(band: VolBand, name: str, fn, growth: int, t_end: float,
                     nx: int, safety: float) -> float:
    key = ("1d", band.sigma_lo2, band.sigma_hi2, name, t_end, nx, safety)
    if key not in _pde_cache:
        grid = PDEGrid.auto(band, T=t_end, dim=1, nx=nx, safety=safety)
        _pde_cache[key] = solve_gheat_1d(band, PayoffSpec(fn, growth), t_end, grid)
    return _pde_cache[key]


def check_moments(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    nx = cfg["gheat"]["nx"]
    safety = cfg["gheat"]["safety"]
    rows = []
    for k in (1, 2, 3, 4):
        tol = cfg.tol("moments_low_order") if k <= 2 else cfg.tol("moments_high_order")
        fn = lambda x, k=k: np.abs(x) ** k
        neg = lambda x, k=k: -(np.abs(x) ** k)
        upper = _solve_1d_cached(band, f"absk{k}", fn, k, 1.0, nx, safety)
        lower = -_solve_1d_cached(band, f"negabsk{k}", neg, k, 1.0, nx, safety)
        rows.append(_two_sided(upper, gnormal_abs_moment(band, 1.0, k, "upper"),
                               tol, f"k={k} upper"))
        rows.append(_two_sided(lower, gnormal_abs_moment(band, 1.0, k, "lower"),
                               tol, f"k={k} lower"))
    measured, target, tol, which = _worst(rows)
    passed = all(r[0] >= 0 for r in rows)
    return CheckResult(
        "A01", "gnormal-absolute-moments", measured, target, tol, passed,
        f"worst: {which} over k=1..4 both sides",
    )


# ---------------------------------------------------------------------------
# A02  scenario engine vs PDE oracle
# ---------------------------------------------------------------------------

ENGINE_PAYOFFS: list[tuple[str, Callable, int, str]] = [
    ("square", lambda x: x**2, 2, "convex"),
    ("neg_square", lambda x: -(x**2), 2, "concave"),
    ("abs", np.abs, 1, "convex"),
    ("identity", lambda x: x, 1, "neither"),
    ("relu_shift", lambda x: np.maximum(x - 1.0, 0.0), 1, "convex"),
    ("cosine2", lambda x: np.cos(2.0 * x), 0, "neither"),
]


def check_engine_vs_oracle(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    sc = cfg["scenarios"]
    n_paths = cfg["run"]["n_paths"]
    grid = np.linspace(0.0, sc["t_end"], sc["slices"] + 1)
    scenarios = bang_bang_scenarios(grid, band, limit=sc["max_scenarios"])
    sampler = gnormal_terminal_sampler()
    se_mult = cfg.tol("engine_se_mult")
    rel = cfg.tol("engine_rel")
    rows = []
    ok = True
    for name, fn, growth, shape in ENGINE_PAYOFFS:
        pde = _solve_1d_cached(
            band, name, fn, growth, sc["t_end"], cfg["gheat"]["nx"],
            cfg["gheat"]["safety"],
        )
        est = sup_expectation(fn, sampler, scenarios, n_paths, cfg.seed,
                              n_jobs=cfg.jobs)
        means = est.scenario_means
        ses = est.scenario_std_errors
        # nested prefixes 2^0 .. 2^k never exceed the PDE value
        sizes = [2**j for j in range(int(math.log2(len(scenarios))) + 1)]
        for size in sizes:
            idx = int(np.argmax(means[:size]))
            mc = float(means[idx])
            slack_tol = se_mult * float(ses[idx]) + 1e-15
            ok &= mc <= pde + slack_tol
            rows.append(_one_sided(mc, pde, slack_tol, f"{name} prefix={size}"))
        if shape in ("convex", "concave"):
            mc = est.value
            gate = max(rel * abs(pde), se_mult * est.std_error)
            ok &= abs(mc - pde) <= gate
            rows.append(_two_sided(mc, pde, gate, f"{name} sharp"))
    measured, target, tol, which = _worst(rows)
    return CheckResult(
        "A02", "scenario-sup-vs-pde", measured, target, tol, ok,
        f"worst: {which}; {len(ENGINE_PAYOFFS)} payoffs, "
        f"{len(scenarios)} scenarios, {n_paths} paths",
    )


# ---------------------------------------------------------------------------
# A03  compatibility identities
# ---------------------------------------------------------------------------


def check_compatibility_identities(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    tol = cfg.tol("compatibility")
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for n1 in (3, 4, 5):
        vectors = rng.standard_normal((n1, n1 + 2))
        rep = check_compatibility(vectors, band, trials=100, seed=cfg.seed + n1,
                                  tol=tol)
        worst = max(worst, rep.max_marginal_dev, rep.max_permutation_dev)
    return CheckResult(
        "A03", "family-compatibility", worst, 0.0, tol, worst <= tol,
        "marginal + permutation identities, 100 trials per family size",
    )


# ---------------------------------------------------------------------------
# A04  pair covariance via the 2D oracle
# ---------------------------------------------------------------------------


def check_covariance_2d(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    tol = cfg.tol("covariance_2d")
    nx = cfg["gheat"]["nx_2d"]
    payoff = PayoffSpec(lambda x, y: x * y, 2)
    rows = []
    for rho in (0.5, 0.0, -0.5):
        key = ("2d-xy", band.sigma_lo2, band.sigma_hi2, rho, nx)
        if key not in _pde_cache:
            gf = GFunction(np.array([[1.0, rho], [rho, 1.0]]), band)
            grid = PDEGrid.auto(band, T=1.0, dim=2, nx=nx,
                                safety=cfg["gheat"]["safety"])
            _pde_cache[key] = solve_gheat_2d(gf, payoff, 1.0, grid)
        val = _pde_cache[key]
        # sup form: rho+ sigma_hi2 - rho- sigma_lo2
        target = max(rho, 0.0) * band.sigma_hi2 - max(-rho, 0.0) * band.sigma_lo2
        note = "sup-form (band floor)" if rho < 0 else ""
        rows.append(_two_sided(val, target, tol, f"rho={rho} {note}".strip()))
    measured, target, tol_, which = _worst(rows)
    passed = all(r[0] >= 0 for r in rows)
    return CheckResult(
        "A04", "pair-covariance-oracle", measured, target, tol_, passed,
        f"worst: {which}; negative-correlation case takes the band floor",
    )


# ---------------------------------------------------------------------------
# A05  orthonormal expansion surrogate
# ---------------------------------------------------------------------------

EXPANSION_PAYOFFS: list[tuple[str, Callable, float]] = [
    ("abs", np.abs, 1.0),
    ("relu_shift", lambda x: np.maximum(x - 1.0, 0.0), 1.0),
    ("neg_absshift", lambda x: -np.abs(x - 0.5), 1.0),
    ("min_cap", lambda x: np.minimum(x, 2.0), 1.0),
    ("clip", lambda x: np.clip(x, -1.0, 1.0), 1.0),
]


def check_expansion(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    space = MeasureSpace(cfg["hilbert"]["length"], cfg["hilbert"]["n_quad"])
    basis = full_trig_basis(space)
    h = L2Element.indicator(space, [(0.7, 2.9)])
    n_trunc = 32
    # Bessel monotonicity is exact algebra
    defects = [expansion_surrogate(h, basis, n, band).defect
               for n in (4, 8, 16, 32, 64)]
    monotone = all(a >= b - 1e-12 for a, b in zip(defects, defects[1:]))

    sur = expansion_surrogate(h, basis, n_trunc, band)
    v_full, v_proj = h.norm2(), sur.proj_norm2
    oracle_tol = cfg.tol("expansion_oracle")
    nx, safety = cfg["gheat"]["nx"], cfg["gheat"]["safety"]
    rows = []
    ok = monotone
    for name, fn, lip in EXPANSION_PAYOFFS:
        full = _solve_1d_cached(band, f"exp-{name}-full", fn, 2, v_full, nx, safety)
        proj = _solve_1d_cached(band, f"exp-{name}-proj", fn, 2, v_proj, nx, safety)
        gate = 2 * oracle_tol + lip * band.sigma_hi * math.sqrt(sur.defect) \
            * math.sqrt(2.0 / math.pi)
        ok &= abs(full - proj) <= gate
        rows.append(_two_sided(proj, full, gate, name))
    measured, target, tol, which = _worst(rows)
    return CheckResult(
        "A05", "expansion-surrogate-gap", measured, target, tol, ok,
        f"worst: {which}; defect at {n_trunc} modes = {sur.defect:.4f}, "
        f"defect monotone: {monotone}",
    )


# ---------------------------------------------------------------------------
# A06  inclusion-exclusion identity
# ---------------------------------------------------------------------------


def check_union_identity(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    tol = cfg.tol("union_exact")
    se_mult = cfg.tol("union_se_mult")
    rng = np.random.default_rng(cfg.seed + 6)
    worst_exact = 0.0
    worst_sigma = 0.0
    length = cfg["hilbert"]["length"]
    for trial in range(50):
        n_sets = 2 + trial % 3
        members = []
        for _ in range(n_sets):
            a = rng.uniform(0.0, length - 1.6)
            w = rng.uniform(0.2, 1.5)
            members.append([(a, a + w)])
        fam = SetFamily.of(*members)
        rep = union_identity_check(
            fam, band, n_paths=10_000, seed=cfg.seed + trial, tol=tol
        )
        worst_exact = max(
            worst_exact,
            abs(rep.signed_variance_coeff - rep.union_measure),
            rep.max_g_deviation,
        )
        worst_sigma = max(worst_sigma, rep.mc_worst_sigma_gap)
    passed = worst_exact <= tol and worst_sigma <= se_mult
    return CheckResult(
        "A06", "inclusion-exclusion", worst_exact, 0.0, tol, passed,
        f"50 random families; worst MC gap {worst_sigma:.2f} SE "
        f"(gate {se_mult:g})",
    )


# ---------------------------------------------------------------------------
# A07  isometry bands
# ---------------------------------------------------------------------------


def _random_elementary(rng, space, partition, n_cells, adapted: bool):
    cell = space.length / n_cells
    n_sets = int(rng.integers(1, 4))
    cells = rng.choice(n_cells, size=n_sets * 2, replace=False)
    sets = []
    for i in range(n_sets):
        pair = sorted(cells[2 * i: 2 * i + 2])
        sets.append(
            tuple((int(c) * cell, (int(c) + 1) * cell) for c in pair)
        )
    if adapted:
        def coeff(i, j, past, base=float(rng.uniform(0.5, 2.0))):
            if past.shape[1] == 0:
                return np.full(past.shape[0], base)
            return base * (1.0 + 0.5 * np.sign(past[:, -1, i]))

        coefficients = coeff
    else:
        coefficients = rng.standard_normal((n_sets, partition.n_slices))
    return ElementaryField(sets=tuple(sets), partition=partition,
                           coefficients=coefficients)


def check_isometry(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    se_mult = cfg.tol("isometry_se_mult")
    space = MeasureSpace(cfg["hilbert"]["length"], cfg["hilbert"]["n_quad"])
    n_cells = 16
    part_basis = Basis(space, "indicator-partition", n_cells=n_cells)
    cos = cosine_basis(space)
    partition = TimePartition.uniform(1.0, 4)
    scenarios = bang_bang_scenarios(partition.times, band)
    n_paths = cfg["noise"]["n_paths"] // 4
    rng = np.random.default_rng(cfg.seed + 7)
    worst_slack = math.inf
    worst_label = ""
    attained = True
    ok = True
    for trial in range(50):
        adapted = trial % 4 == 3
        field = _random_elementary(rng, space, partition, n_cells, adapted)
        rep = isometry_report(field, part_basis, n_cells, band, scenarios,
                              n_paths, cfg.seed + trial, se_mult=se_mult)
        ok &= rep.passed
        if field.is_deterministic:
            attained &= np.all(
                scenarios[rep.argmax_index].values == band.sigma_hi2
            ) and np.all(scenarios[rep.argmin_index].values == band.sigma_lo2)
        slack = (rep.hi_bound + se_mult * rep.sup_std_error) - rep.sup_estimate
        if slack < worst_slack:
            worst_slack = slack
            worst_label = f"elementary#{trial}"
    n_modes = 12
    for trial in range(50):
        rows = rng.standard_normal((partition.n_slices, n_modes))
        sq_norm = float((rows**2).sum(axis=1) @ partition.dts)
        means, ses = [], []
        for scen in scenarios:
            inc = sample_noise_ensemble(partition, cos, n_modes, scen,
                                        n_paths, cfg.seed + 100 + trial)
            v = integrate_idgbm_ensemble(rows, inc) ** 2
            means.append(float(v.mean()))
            ses.append(float(v.std(ddof=1) / math.sqrt(n_paths)))
        hi, lo = int(np.argmax(means)), int(np.argmin(means))
        ok &= means[hi] <= band.sigma_hi2 * sq_norm + se_mult * ses[hi]
        ok &= means[lo] >= band.sigma_lo2 * sq_norm - se_mult * ses[lo]
        attained &= np.all(scenarios[hi].values == band.sigma_hi2)
        slack = band.sigma_hi2 * sq_norm + se_mult * ses[hi] - means[hi]
        if slack < worst_slack:
            worst_slack = slack
            worst_label = f"band-limited#{trial}"
    ok &= attained
    return CheckResult(
        "A07", "isometry-band", worst_slack, 0.0, math.inf, ok,
        f"100 integrands inside the band (gate {se_mult:g} SE); smallest "
        f"upper slack at {worst_label}; extremal attainment: {attained}",
    )


# ---------------------------------------------------------------------------
# A08  capacity Chebyshev bound
# ---------------------------------------------------------------------------


def check_capacity(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    se_mult = cfg.tol("chebyshev_se_mult")
    n_paths = cfg["noise"]["n_paths"]
    grid = np.linspace(0.0, 1.0, 5)
    scenarios = bang_bang_scenarios(grid, band, limit=8)
    sampler = gnormal_terminal_sampler()
    from .seeding import path_blocks

    outcomes = []
    for scen in scenarios:
        parts = []
        for start, stop, rng in path_blocks(cfg.seed + 8, n_paths):
            parts.append(sampler(scen, rng, stop - start))
        outcomes.append(np.concatenate(parts))
    outcomes = np.array(outcomes)

    sig = band.sigma_hi
    variants = [
        ("abs", np.abs(outcomes)),
        ("square", outcomes**2),
        ("relu", np.maximum(outcomes - 0.5, 0.0)),
        ("cube", np.abs(outcomes) ** 3),
    ]
    eps_grid = {
        "abs": [0.5 * sig, sig * math.sqrt(2 / math.pi), 2 * sig, 10 * sig],
        "square": [0.5 * sig**2, sig**2, 4 * sig**2, 25 * sig**2],
        "relu": [0.2 * sig, 0.5 * sig, sig, 5 * sig],
        "cube": [sig**3, 2 * sig**3, 8 * sig**3, 50 * sig**3],
    }
    worst_margin = math.inf
    ok = True
    pairs = 0
    for name, xi in variants:
        for eps in eps_grid[name]:
            rep = chebyshev_capacity_check(xi, eps, se_mult=se_mult)
            ok &= rep.passed
            pairs += 1
            if rep.margin < worst_margin:
                worst_margin = rep.margin
    # four more pairs on the positive-part variant to reach twenty
    relu2 = np.maximum(-outcomes, 0.0)
    for eps in (0.3 * sig, sig, 2 * sig, 6 * sig):
        rep = chebyshev_capacity_check(relu2, eps, se_mult=se_mult)
        ok &= rep.passed
        pairs += 1
        if rep.margin < worst_margin:
            worst_margin = rep.margin
    return CheckResult(
        "A08", "capacity-chebyshev", worst_margin, 0.0, math.inf,
        ok and pairs == 20,
        f"{pairs} (xi, eps) pairs over {len(scenarios)} scenarios; "
        f"smallest margin {worst_margin:.3g}",
    )


# ---------------------------------------------------------------------------
# A09  infinite-dimensional path norm bound
# ---------------------------------------------------------------------------


def check_idgbm_norm(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    se_mult = cfg.tol("idgbm_se_mult")
    space = MeasureSpace(cfg["hilbert"]["length"], cfg["hilbert"]["n_quad"])
    cos = cosine_basis(space)
    q = hs_one_over_n(cfg["noise"]["n_modes"])
    partition = TimePartition.uniform(2.0, 16)
    grid = np.linspace(0.0, 2.0, 5)
    scenarios = bang_bang_scenarios(grid, band, limit=8) + [
        constant_scenario(band, band.sigma_hi2, 2.0),
        constant_scenario(band, band.sigma_lo2, 2.0),
    ]
    n_paths = cfg["noise"]["n_paths"]
    norm_stats = []
    for scen in scenarios:
        inc = sample_noise_ensemble(partition, cos, q.n_max, scen, n_paths,
                                    cfg.seed + 9)
        norm_stats.append(norm_process_ensemble(q, inc))
    rows = []
    ok = True
    for l, t in ((4, 0.5), (8, 1.0), (16, 2.0)):
        sup_mean, sup_se = -math.inf, 0.0
        for norms_all in norm_stats:
            norms = norms_all[:, l]
            m = float(norms.mean())
            if m > sup_mean:
                sup_mean = m
                sup_se = float(norms.std(ddof=1) / math.sqrt(n_paths))
        bound = t * band.sigma_hi2 * (math.pi**2 / 6.0)
        ok &= sup_mean <= bound + se_mult * sup_se
        rows.append(_one_sided(sup_mean, bound, se_mult * sup_se, f"t={t}"))
    measured, target, tol, which = _worst(rows)
    return CheckResult(
        "A09", "embedded-path-norm-bound", measured, target, tol, ok,
        f"worst: {which}; square-summable weights 1/n with analytic tail",
    )


# ---------------------------------------------------------------------------
# A10  Green kernel identities
# ---------------------------------------------------------------------------


def check_kernel(cfg: RunConfig) -> CheckResult:
    mass = cfg["spde"]["mass"]
    tol_mass = cfg.tol("kernel_mass")
    tol_dual = cfg.tol("kernel_duality")
    ys = np.linspace(0.0, 2 * math.pi, 8193)
    worst_mass = 0.0
    for t in (0.01, 0.1, 0.5, 1.0):
        for x in (0.3, 1.7, 3.14, 5.9):
            total = float(np.trapezoid(green_eigen(t, x, ys, mass), ys))
            worst_mass = max(worst_mass, abs(total - math.exp(-(mass**2) * t)))
    rng = np.random.default_rng(cfg.seed + 10)
    worst_dual = 0.0
    sym_exact = True
    for _ in range(100):
        t = 10 ** rng.uniform(-3, 0)
        x, y = rng.uniform(0, 2 * math.pi, 2)
        worst_dual = max(
            worst_dual,
            abs(green_eigen(t, x, y, mass) - green_images(t, x, y, mass, 8)),
        )
        sym_exact &= green_eigen(t, x, y, mass) == green_eigen(t, y, x, mass)
        sym_exact &= green_images(t, x, y, mass) == green_images(t, y, x, mass)
    passed = worst_mass <= tol_mass and worst_dual <= tol_dual and sym_exact
    return CheckResult(
        "A10", "kernel-mass-duality-symmetry", worst_dual, 0.0, tol_dual, passed,
        f"mass defect {worst_mass:.2e} (gate {tol_mass:g}); symmetry exact: "
        f"{sym_exact}",
    )


# ---------------------------------------------------------------------------
# A11  solver coupling
# ---------------------------------------------------------------------------


def _spde_cfg(cfg: RunConfig) -> SPDEConfig:
    sp = cfg["spde"]
    return SPDEConfig(
        mass=sp["mass"],
        t_end=sp["t_end"],
        n_modes=sp["n_modes"],
        nx=sp["nx"],
        n_slices=sp["slices"],
        quad_factor=sp["quad_factor"],
        n_quad=cfg["hilbert"]["n_quad"],
    )


def check_coupling(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    base = _spde_cfg(cfg)
    t_end = base.t_end
    scenario = ScenarioPath(
        np.array([0.0, t_end / 2, t_end]),
        np.array([band.sigma_lo2, band.sigma_hi2]),
        band,
    )
    sweep = coupling_sweep(None, scenario, base, levels=3, n_paths=4,
                           seed=cfg.seed + 11)
    base_worst = max(sweep.per_path_gaps[0])
    rel_gate = cfg.tol("coupling_rel")
    lo, hi = cfg.tol("coupling_order_lo"), cfg.tol("coupling_order_hi")
    passed = base_worst <= rel_gate and lo <= sweep.fitted_order <= hi
    return CheckResult(
        "A11", "mild-spectral-coupling", base_worst, 0.0, rel_gate, passed,
        f"fitted dt-order {sweep.fitted_order:.3f} (gate [{lo:g}, {hi:g}]); "
        f"gaps per level {[f'{g:.2e}' for g in sweep.median_gaps]}",
    )


# ---------------------------------------------------------------------------
# A12  mode diagnostics
# ---------------------------------------------------------------------------


def check_ou_diagnostics(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    mass = cfg["spde"]["mass"]
    mean_mult = cfg.tol("ou_mean_se_mult")
    cov_mult = cfg.tol("ou_cov_se_mult")
    cls_mult = cfg.tol("ou_classical_se_mult")
    n_paths = cfg["noise"]["n_paths"]
    ok = True
    worst_z = 0.0

    # mode means across the scenario sweep
    partition = TimePartition.uniform(0.5, 16)
    grid = np.linspace(0.0, 0.5, 5)
    scenarios = bang_bang_scenarios(grid, band)
    for n in (0, 1, 3):
        mode = GOUMode(index=n, drift=-(n**2 + mass**2), psi0=1.5)
        for scen in scenarios:
            paths = simulate_mode_ensemble(mode, scen, partition, n_paths,
                                           cfg.seed + 12)
            for l in (8, 16):
                t = partition.times[l]
                se = float(paths[:, l].std(ddof=1) / math.sqrt(n_paths))
                z = abs(float(paths[:, l].mean()) - mode.mean(t)) / se
                worst_z = max(worst_z, z)
                ok &= z <= mean_mult

    # covariance bound on a 5x5 (s,t) grid at the sup over scenarios
    part2 = TimePartition.uniform(1.0, 20)
    mode = GOUMode(index=1, drift=-(1 + mass**2), psi0=0.0)
    grid2 = np.linspace(0.0, 1.0, 5)
    scen2 = bang_bang_scenarios(grid2, band)
    ls = [4, 8, 12, 16, 20]
    worst_cov_z = -math.inf
    ensembles = [
        simulate_mode_ensemble(mode, s, part2, n_paths, cfg.seed + 13)
        for s in scen2
    ]
    for li in ls:
        for lj in ls:
            s_t, t_t = part2.times[li], part2.times[lj]
            bound = mode.cov_upper_bound(s_t, t_t, band.sigma_hi2)
            best, best_se = -math.inf, 0.0
            for paths in ensembles:
                prod = paths[:, li] * paths[:, lj]
                est = float(prod.mean())
                if est > best:
                    best = est
                    best_se = float(prod.std(ddof=1) / math.sqrt(n_paths))
            z = (best - bound) / best_se if best_se > 0 else -math.inf
            worst_cov_z = max(worst_cov_z, z)
            ok &= best <= bound + cov_mult * best_se

    # degenerate band reduces to the classical covariance
    s_mid = 0.5 * (band.sigma_lo2 + band.sigma_hi2)
    dband = VolBand(s_mid, s_mid)
    dsc = ScenarioPath(np.array([0.0, 1.0]), np.array([s_mid]), dband)
    paths = simulate_mode_ensemble(mode, dsc, part2, n_paths, cfg.seed + 14)
    for li, lj in ((8, 16), (12, 12), (4, 20)):
        s_t, t_t = part2.times[li], part2.times[lj]
        prod = paths[:, li] * paths[:, lj]
        se = float(prod.std(ddof=1) / math.sqrt(n_paths))
        target = classical_ou_cov(s_t, t_t, s_mid, mode.drift)
        ok &= abs(float(prod.mean()) - target) <= cls_mult * se
    return CheckResult(
        "A12", "mode-mean-and-covariance", worst_z, 0.0, mean_mult, ok,
        f"worst mean z={worst_z:.2f} (gate {mean_mult:g}); worst covariance "
        f"z={worst_cov_z:.2f} (gate {cov_mult:g}); degenerate band matches "
        f"classical within {cls_mult:g} SE",
    )


# ---------------------------------------------------------------------------
# A13  weak-solution residual and the second-moment bound
# ---------------------------------------------------------------------------


def _residual_test_fns() -> list[CosineTestFunction]:
    def fn(mode, amp, damp):
        return CosineTestFunction(modes=(mode,), amps=(amp,), damps=(damp,))

    return [
        fn(0, lambda t: math.cos(t) + 2.0, lambda t: -math.sin(t)),
        fn(1, lambda t: math.cos(t) + 2.0, lambda t: -math.sin(t)),
        fn(2, lambda t: math.exp(-t) + 1.0, lambda t: -math.exp(-t)),
        fn(1, lambda t: 1.0 + 0.5 * t, lambda t: 0.5),
        fn(2, lambda t: math.sin(2 * t) + 1.5, lambda t: 2 * math.cos(2 * t)),
    ]


def check_weak_solution(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    base = _spde_cfg(cfg)
    gate = cfg.tol("weak_residual")
    t_end = base.t_end
    scenario = ScenarioPath(
        np.array([0.0, t_end / 2, t_end]),
        np.array([band.sigma_lo2, band.sigma_hi2]),
        band,
    )
    psi = np.zeros(base.n_modes)
    psi[1] = 1.0
    noise = make_noise(scenario, base, cfg.seed + 15)
    path = spectral_solve(psi, noise, base)
    residuals = [
        weak_solution_residual(path, noise, fn, base)
        for fn in _residual_test_fns()
    ]
    worst = max(residuals)
    ok = worst <= gate

    # refinement: medians over a few paths must decrease
    med = []
    for level, slices in enumerate((base.n_slices, base.n_slices * 2,
                                    base.n_slices * 4)):
        c = SPDEConfig(mass=base.mass, t_end=base.t_end, n_modes=base.n_modes,
                       nx=base.nx, n_slices=slices,
                       quad_factor=base.quad_factor, n_quad=base.n_quad)
        vals = []
        for p in range(3):
            nz = make_noise(scenario, c, cfg.seed + 16 + p)
            pth = spectral_solve(psi, nz, c)
            vals.append(weak_solution_residual(pth, nz, _residual_test_fns()[1], c))
        med.append(float(np.median(vals)))
    ok &= med[2] < med[0]

    scen_list = bang_bang_scenarios(
        np.array([0.0, t_end / 2, t_end]), band
    )
    rep = second_moment_sup(None, band, scen_list, base,
                            n_paths=cfg["spde"]["n_paths"], seed=cfg.seed + 17,
                            se_mult=cfg.tol("second_moment_se_mult"))
    ok &= rep.passed
    return CheckResult(
        "A13", "weak-form-residual", worst, 0.0, gate, ok,
        f"5 test functions; refinement medians {[f'{m:.2e}' for m in med]}; "
        f"second-moment sup {rep.empirical_sup:.4f} <= bound "
        f"{rep.analytic_bound:.4f}",
    )


# ---------------------------------------------------------------------------
# A14  contraction construction
# ---------------------------------------------------------------------------


def check_contraction(cfg: RunConfig) -> CheckResult:
    band = cfg.band
    mass = cfg["spde"]["mass"]
    tol = cfg.tol("contraction_tol")
    max_iter = int(cfg.tol("contraction_iters"))
    partition = TimePartition.uniform(cfg["spde"]["t_end"], cfg["spde"]["slices"])
    mode = GOUMode(index=1, drift=-(1 + mass**2), psi0=1.0)
    scenario = constant_scenario(band, band.sigma_hi2, cfg["spde"]["t_end"])
    space = MeasureSpace(cfg["hilbert"]["length"], cfg["hilbert"]["n_quad"])
    inc = sample_noise_ensemble(partition, cosine_basis(space), 1, scenario,
                                64, cfg.seed + 18)[:, :, 0]
    rep = contraction_fixed_point(mode, inc, partition, tol=tol,
                                  max_iter=max_iter)
    passed = rep.converged and rep.iterations_to_tol <= max_iter
    return CheckResult(
        "A14", "contraction-fixed-point", rep.distances[-1], 0.0, tol, passed,
        f"{rep.iterations_to_tol} iterations to {tol:g} in the weighted norm",
    )


# ---------------------------------------------------------------------------
# A15  determinism
# ---------------------------------------------------------------------------


def check_determinism(cfg: RunConfig) -> CheckResult:
    from .reporting import fmt17

    band = cfg.band
    grid = np.linspace(0.0, 1.0, 5)
    scenarios = bang_bang_scenarios(grid, band)
    sampler = gnormal_terminal_sampler()
    runs = []
    for jobs in (1, 2, 4):
        est = sup_expectation(lambda x: np.abs(x), sampler, scenarios, 20_000,
                              cfg.seed + 19, n_jobs=jobs)
        runs.append(
            (fmt17(est.value), fmt17(est.std_error),
             tuple(fmt17(v) for v in est.scenario_means))
        )
    jobs_identical = runs[0] == runs[1] == runs[2]

    reps = [
        check_compatibility_identities(cfg) for _ in range(2)
    ]
    rerun_identical = reps[0] == reps[1]
    passed = jobs_identical and rerun_identical
    return CheckResult(
        "A15", "bitwise-determinism", 1.0 if passed else 0.0, 1.0, 0.0, passed,
        f"worker counts 1/2/4 identical: {jobs_identical}; "
        f"re-run identical: {rerun_identical}",
    )


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

CHECKS: dict[str, Callable[[RunConfig], CheckResult]] = {
    "A01": check_moments,
    "A02": check_engine_vs_oracle,
    "A03": check_compatibility_identities,
    "A04": check_covariance_2d,
    "A05": check_expansion,
    "A06": check_union_identity,
    "A07": check_isometry,
    "A08": check_capacity,
    "A09": check_idgbm_norm,
    "A10": check_kernel,
    "A11": check_coupling,
    "A12": check_ou_diagnostics,
    "A13": check_weak_solution,
    "A14": check_contraction,
    "A15": check_determinism,
}

SUITES: dict[str, tuple[str, ...]] = {
    "gnormal": ("A01", "A02", "A03", "A04"),
    "field": ("A05", "A06"),
    "noise": ("A07", "A08", "A09"),
    "spde": ("A10", "A11", "A12", "A13", "A14"),
    "all": tuple(f"A{i:02d}" for i in range(1, 16)),
}


def run_suite(suite: str, cfg: RunConfig, echo=print) -> list[CheckResult]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    results = []
    for cid in SUITES[suite]:
        res = CHECKS[cid](cfg)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
