"""Scenario sets and the sublinear-expectation engine.

A volatility band [sigma_lo2, sigma_hi2] induces a family of classical
probability scenarios, one per admissible variance-rate path theta(t).
Upper expectations are evaluated two ways that the rest of the package
cross-checks against each other:

* closed form, for quadratic functionals, via the sublinear function
  G(A) = (1/2) sup_theta tr(A * theta * Gram);
* Monte Carlo, as a maximum of per-scenario classical means computed with
  common random numbers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .seeding import path_blocks

Array = np.ndarray


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VolBand:
    """Variance-rate uncertainty interval 0 <= sigma_lo2 <= sigma_hi2.

    A degenerate band (equal endpoints) switches everything back to
    classical probability.
    """

    sigma_lo2: float
    sigma_hi2: float

    def __post_init__(self):
        lo, hi = float(self.sigma_lo2), float(self.sigma_hi2)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("band.sigma_lo2/sigma_hi2 must be finite")
        if lo < 0:
            raise ValueError(f"band.sigma_lo2 must be >= 0, got {lo}")
        if lo > hi:
            raise ValueError(
                f"band.sigma_lo2 must be <= band.sigma_hi2, got ({lo}, {hi})"
            )
        object.__setattr__(self, "sigma_lo2", lo)
        object.__setattr__(self, "sigma_hi2", hi)

    @property
    def sigma_hi(self) -> float:
        return float(np.sqrt(self.sigma_hi2))

    @property
    def sigma_lo(self) -> float:
        return float(np.sqrt(self.sigma_lo2))

    def is_degenerate(self) -> bool:
        return self.sigma_lo2 == self.sigma_hi2

    def contains(self, theta: float, tol: float = 1e-12) -> bool:
        return self.sigma_lo2 - tol <= theta <= self.sigma_hi2 + tol


@dataclass(frozen=True)
class ScenarioPath:
    """Piecewise-constant variance-rate control on a strictly increasing grid.

    values[j] applies on [time_grid[j], time_grid[j+1]).
    """

    time_grid: Array
    values: Array
    band: VolBand

    def __post_init__(self):
        tg = np.asarray(self.time_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if tg.ndim != 1 or len(tg) < 2:
            raise ValueError("time_grid needs at least two instants")
        if np.any(np.diff(tg) <= 0):
            raise ValueError("time_grid must be strictly increasing")
        if len(vals) != len(tg) - 1:
            raise ValueError(
                f"expected {len(tg) - 1} slice values, got {len(vals)}"
            )
        for v in vals:
            if not self.band.contains(v):
                raise ValueError(f"scenario value {v} outside band "
                                 f"[{self.band.sigma_lo2}, {self.band.sigma_hi2}]")
        object.__setattr__(self, "time_grid", tg)
        object.__setattr__(self, "values", vals)

    @property
    def horizon(self) -> float:
        return float(self.time_grid[-1])

    def value_at(self, t: float) -> float:
        """theta at time t (right-continuous; final slice closed at T)."""
        tg = self.time_grid
        if t < tg[0] - 1e-12 or t > tg[-1] + 1e-12:
            raise ValueError(f"t={t} outside scenario horizon [{tg[0]}, {tg[-1]}]")
        j = int(np.searchsorted(tg, t, side="right") - 1)
        return float(self.values[min(max(j, 0), len(self.values) - 1)])

    def label(self) -> str:
        return ",".join(f"{v:g}" for v in self.values)


def constant_scenario(band: VolBand, theta: float, t_end: float = 1.0) -> ScenarioPath:
    return ScenarioPath(np.array([0.0, t_end]), np.array([theta]), band)


def bang_bang_scenarios(
    time_grid: Array, band: VolBand, limit: int | None = None
) -> list[ScenarioPath]:
    """All {lo, hi}-valued controls on the grid, in binary counting order.

    Scenario index s has bit j (LSB = slice 0) choosing hi when set, so the
    enumeration starts at the all-lo path and ends at the all-hi path.
    Prefixes of the list are nested, which the refinement-monotonicity
    checks rely on.
    """
    time_grid = np.asarray(time_grid, dtype=float)
    m = len(time_grid) - 1
    total = 2**m
    n = total if limit is None else min(limit, total)
    lo, hi = band.sigma_lo2, band.sigma_hi2
    out = []
    for s in range(n):
        vals = np.array([(hi if (s >> j) & 1 else lo) for j in range(m)])
        out.append(ScenarioPath(time_grid, vals, band))
    return out


def constant_scenarios(
    time_grid: Array, band: VolBand, n_values: int
) -> list[ScenarioPath]:
    """Constant controls on an interior grid of the band (inclusive ends)."""
    time_grid = np.asarray(time_grid, dtype=float)
    m = len(time_grid) - 1
    thetas = np.linspace(band.sigma_lo2, band.sigma_hi2, max(n_values, 2))
    return [ScenarioPath(time_grid, np.full(m, th), band) for th in thetas]


# ---------------------------------------------------------------------------
# Closed-form sublinear functions
# ---------------------------------------------------------------------------


def g_scalar(band: VolBand, a: float) -> float:
    """(1/2)(a+ * sigma_hi2 - a- * sigma_lo2) = (1/2) sup_theta theta*a."""
    a = float(a)
    return 0.5 * (max(a, 0.0) * band.sigma_hi2 - max(-a, 0.0) * band.sigma_lo2)


def g_scalar_array(band: VolBand, a: Array) -> Array:
    return 0.5 * (
        np.maximum(a, 0.0) * band.sigma_hi2 - np.maximum(-a, 0.0) * band.sigma_lo2
    )


@dataclass(frozen=True)
class GFunction:
    """Sublinear function of a finite parameter family.

    gram holds the pairwise inner products of the parameters; evaluation at
    a symmetric A is (1/2) sup_theta tr(A * theta * gram), which collapses
    to the scalar form applied to tr(A @ gram).
    """

    gram: Array
    band: VolBand
    psd_tol: float = 1e-10

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"gram must be square, got shape {g.shape}")
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-12 * (1 + np.abs(g).max())):
            raise ValueError("gram must be symmetric")
        g = 0.5 * (g + g.T)
        scale = np.linalg.norm(g, 2) if g.size else 0.0
        if g.size:
            w = np.linalg.eigvalsh(g)
            if w.min() < -self.psd_tol * max(scale, 1e-300):
                raise ValueError(
                    f"gram not PSD within tolerance: min eigenvalue {w.min():g}"
                )
        object.__setattr__(self, "gram", g)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def __call__(self, a: Array) -> float:
        return g_matrix(self, a)


def g_matrix(gf: GFunction, a: Array) -> float:
    """Exact sup over the band: g_scalar applied to tr(A @ gram)."""
    a = np.asarray(a, dtype=float)
    if a.shape != gf.gram.shape:
        raise ValueError(
            f"matrix shape {a.shape} does not match gram shape {gf.gram.shape}"
        )
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * (1 + np.abs(a).max())):
        raise ValueError("A must be symmetric")
    return g_scalar(gf.band, float(np.trace(a @ gf.gram)))


# ---------------------------------------------------------------------------
# Compatibility of the family (marginal + permutation identities)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompatibilityReport:
    trials: int
    max_marginal_dev: float
    max_permutation_dev: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.max_marginal_dev, self.max_permutation_dev) <= self.tol


def check_compatibility(
    vectors: Array,
    band: VolBand,
    trials: int = 100,
    seed: int = 0,
    tol: float = 1e-12,
) -> CompatibilityReport:
    """Randomized check of marginal and permutation consistency.

    vectors: (n+1, d) coordinates of the parameter family (rows h_1..h_{n+1});
    their Gram matrix drives both identities.  For random symmetric A the
    check asserts that padding A with a zero row/column while appending
    h_{n+1} leaves the value unchanged, and that permuting the family equals
    back-permuting the matrix entries.
    """
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    n1 = v.shape[0]
    if n1 < 2:
        raise ValueError("need at least two family members")
    n = n1 - 1
    gram_full = v @ v.T
    gf_full = GFunction(gram_full, band)
    gf_sub = GFunction(gram_full[:n, :n], band)

    rng = np.random.default_rng(seed)
    worst_marginal = 0.0
    worst_perm = 0.0
    for _ in range(trials):
        b = rng.standard_normal((n, n))
        a = 0.5 * (b + b.T)
        padded = np.zeros((n1, n1))
        padded[:n, :n] = a
        worst_marginal = max(worst_marginal, abs(gf_full(padded) - gf_sub(a)))

        perm = rng.permutation(n)
        gram_perm = gram_full[:n, :n][np.ix_(perm, perm)]
        lhs = GFunction(gram_perm, band)(a)
        inv = np.argsort(perm)
        rhs = gf_sub(a[np.ix_(inv, inv)])
        worst_perm = max(worst_perm, abs(lhs - rhs))
    return CompatibilityReport(trials, worst_marginal, worst_perm, tol)


# ---------------------------------------------------------------------------
# Scenario Monte Carlo engine
# ---------------------------------------------------------------------------

#: sampler(scenario, rng, n) -> outcomes with leading axis n; it must draw a
#: fixed number of variates per path regardless of the scenario, so common
#: random numbers stay aligned across scenarios.
Sampler = Callable[[ScenarioPath, np.random.Generator, int], Array]
Payoff = Callable[[Array], Array]


@dataclass(frozen=True)
class SublinearEstimate:
    value: float
    std_error: float
    argmax_scenario: ScenarioPath
    n_paths: int
    scenario_means: Array = field(repr=False, default=None)
    scenario_std_errors: Array = field(repr=False, default=None)

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")


def _scenario_mean(
    payoff: Payoff,
    sampler: Sampler,
    scenario: ScenarioPath,
    n_paths: int,
    seed: int,
) -> tuple[float, float]:
    total = 0.0
    total_sq = 0.0
    for start, stop, rng in path_blocks(seed, n_paths):
        x = sampler(scenario, rng, stop - start)
        vals = np.asarray(payoff(x), dtype=float)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            raise ValueError(
                f"non-finite payoff sample at path index {start + int(bad[0])}"
            )
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
    mean = total / n_paths
    var = max(total_sq / n_paths - mean * mean, 0.0)
    return mean, float(np.sqrt(var / n_paths))


def sup_expectation(
    payoff: Payoff,
    sampler: Sampler,
    scenarios: Sequence[ScenarioPath],
    n_paths: int,
    seed: int,
    n_jobs: int = 1,
) -> SublinearEstimate:
    """max over scenarios of the classical Monte Carlo mean of the payoff.

    Every scenario sees identical per-path base seeds (common random
    numbers), so the argmax is not noise-dominated and refinement of the
    scenario list is monotone run by run.  Reductions happen in fixed
    scenario order; the result is bit-identical for any n_jobs.
    """
    scenarios = list(scenarios)
    if not scenarios:
        raise ValueError("empty scenario enumeration")

    results: list[tuple[float, float]] = [None] * len(scenarios)  # type: ignore

    def work(i: int) -> None:
        results[i] = _scenario_mean(payoff, sampler, scenarios[i], n_paths, seed)

    if n_jobs > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(work, range(len(scenarios))))
    else:
        for i in range(len(scenarios)):
            work(i)

    means = np.array([r[0] for r in results])
    ses = np.array([r[1] for r in results])
    best = int(np.argmax(means))
    return SublinearEstimate(
        value=float(means[best]),
        std_error=float(ses[best]),
        argmax_scenario=scenarios[best],
        n_paths=n_paths,
        scenario_means=means,
        scenario_std_errors=ses,
    )


def lower_expectation(
    payoff: Payoff,
    sampler: Sampler,
    scenarios: Sequence[ScenarioPath],
    n_paths: int,
    seed: int,
    n_jobs: int = 1,
) -> SublinearEstimate:
    """-sup_expectation(-payoff); argmax_scenario is then the minimizer."""
    est = sup_expectation(
        lambda x: -np.asarray(payoff(x)), sampler, scenarios, n_paths, seed, n_jobs
    )
    return SublinearEstimate(
        value=-est.value,
        std_error=est.std_error,
        argmax_scenario=est.argmax_scenario,
        n_paths=est.n_paths,
        scenario_means=None if est.scenario_means is None else -est.scenario_means,
        scenario_std_errors=est.scenario_std_errors,
    )


def gnormal_terminal_sampler(norm_h: float = 1.0) -> Sampler:
    """Terminal value of a scenario Brownian integral with |h| = norm_h.

    Under scenario theta(.) the outcome is N(0, norm_h^2 * sum theta_j dt_j);
    the base normals do not depend on the scenario.
    """

    def sampler(scenario: ScenarioPath, rng: np.random.Generator, n: int) -> Array:
        dts = np.diff(scenario.time_grid)
        z = rng.standard_normal((n, len(dts)))
        return norm_h * z @ np.sqrt(scenario.values * dts)

    return sampler


# ---------------------------------------------------------------------------
# Capacity (upper probability) Chebyshev check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapacityReport:
    eps: float
    max_frequency: float
    bound: float
    margin: float
    combined_std_error: float

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0


def chebyshev_capacity_check(
    samples_per_scenario: Array, eps: float, se_mult: float = 3.0
) -> CapacityReport:
    """Check capacity{xi >= eps} <= sup-expectation(xi)/eps on samples.

    samples_per_scenario: (n_scenarios, n_paths) nonnegative samples of xi,
    one row per scenario.  Both sides are empirical, so the bound carries
    se_mult combined standard errors of slack.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = np.atleast_2d(np.asarray(samples_per_scenario, dtype=float))
    if np.any(x < 0):
        raise ValueError("samples must be nonnegative")
    n = x.shape[1]
    freqs = (x >= eps).mean(axis=1)
    max_freq = float(freqs.max())
    means = x.mean(axis=1)
    best = int(np.argmax(means))
    se_mean = float(x[best].std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    worst_freq = int(np.argmax(freqs))
    p = freqs[worst_freq]
    se_freq = float(np.sqrt(max(p * (1 - p), 0.0) / n))
    combined = se_freq + se_mean / eps
    bound = float(means[best] / eps + se_mult * combined)
    return CapacityReport(
        eps=eps,
        max_frequency=max_freq,
        bound=bound,
        margin=bound - max_freq,
        combined_std_error=combined,
    )
