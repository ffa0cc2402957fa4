"""Time-sliced uncertain spacetime noise and its stochastic integrals.

Canonical noise coordinates are increments against the first n_modes
orthonormal basis elements: given a scenario, entry (j, n) is an
independent N(0, theta_j * dt_j) draw, slices independent of each other.
Test-function and indicator increments are derived through coefficients,
so every consumer (elementary integrals, infinite-dimensional paths, both
SPDE solvers) draws on literally the same randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import intervals as iv
from .hilbert import Basis, L2Element, HSOperator, coeffs as basis_coeffs
from .scenarios import ScenarioPath, VolBand
from .seeding import standard_normal_paths

Array = np.ndarray


@dataclass(frozen=True)
class TimePartition:
    times: Array

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("partition needs at least two instants")
        if abs(t[0]) > 1e-15:
            raise ValueError("partition must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("partition must be strictly increasing")
        object.__setattr__(self, "times", t)

    @staticmethod
    def uniform(t_end: float, n_slices: int) -> "TimePartition":
        return TimePartition(np.linspace(0.0, t_end, n_slices + 1))

    @property
    def n_slices(self) -> int:
        return len(self.times) - 1

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @cached_property
    def dts(self) -> Array:
        return np.diff(self.times)

    @cached_property
    def midpoints(self) -> Array:
        return 0.5 * (self.times[:-1] + self.times[1:])


def slice_thetas(scenario: ScenarioPath, partition: TimePartition) -> Array:
    """Per-slice theta; every scenario breakpoint must be a partition point."""
    if scenario.horizon < partition.horizon - 1e-12:
        raise ValueError("scenario horizon shorter than the partition")
    interior = scenario.time_grid[
        (scenario.time_grid > 1e-15)
        & (scenario.time_grid < partition.horizon - 1e-15)
    ]
    for b in interior:
        if np.min(np.abs(partition.times - b)) > 1e-12:
            raise ValueError(
                f"scenario breakpoint {b} is not aligned with the partition"
            )
    return np.array([scenario.value_at(t) for t in partition.midpoints])


@dataclass(frozen=True)
class NoiseRealization:
    """One sampled path of per-slice, per-mode increments."""

    partition: TimePartition
    basis: Basis
    n_modes: int
    scenario: ScenarioPath
    increments: Array  # (n_slices, n_modes)
    seed: int | None = None

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        expected = (self.partition.n_slices, self.n_modes)
        if inc.shape != expected:
            raise ValueError(f"increments must have shape {expected}, got {inc.shape}")
        if self.n_modes > self.basis.size_limit:
            raise ValueError(
                f"n_modes {self.n_modes} beyond basis limit {self.basis.size_limit}"
            )
        object.__setattr__(self, "increments", inc)

    @cached_property
    def thetas(self) -> Array:
        return slice_thetas(self.scenario, self.partition)

    def mode_paths(self) -> Array:
        """Cumulative mode values W(t_l, e_n), shape (n_slices+1, n_modes)."""
        out = np.zeros((self.partition.n_slices + 1, self.n_modes))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out


def sample_noise_ensemble(
    partition: TimePartition,
    basis: Basis,
    n_modes: int,
    scenario: ScenarioPath,
    n_paths: int,
    seed: int,
) -> Array:
    """(n_paths, n_slices, n_modes) increments under one scenario.

    The base normals depend only on (seed, path index), so calling this per
    scenario realizes common random numbers across the scenario sweep.
    """
    if n_modes < 1 or n_modes > basis.size_limit:
        raise ValueError(f"n_modes must be in [1, {basis.size_limit}]")
    thetas = slice_thetas(scenario, partition)
    z = standard_normal_paths(seed, n_paths, (partition.n_slices, n_modes))
    scale = np.sqrt(thetas * partition.dts)
    return z * scale[None, :, None]


def sample_noise(
    partition: TimePartition,
    basis: Basis,
    n_modes: int,
    scenario: ScenarioPath,
    seed: int,
) -> NoiseRealization:
    inc = sample_noise_ensemble(partition, basis, n_modes, scenario, 1, seed)[0]
    return NoiseRealization(partition, basis, n_modes, scenario, inc, seed=seed)


def _mode_vector(f: L2Element | Array, basis: Basis, n_modes: int) -> Array:
    """Coefficients of f against the first n_modes basis elements.

    Coefficient-form elements with significant content beyond n_modes are
    rejected; grid and indicator forms are projected (truncation is the
    caller's concern and is reported by the integrators).
    """
    if isinstance(f, np.ndarray):
        c = np.asarray(f, dtype=float)
        if len(c) > n_modes:
            tail = c[n_modes:]
            if float(tail @ tail) > 1e-20:
                raise ValueError("integrand exceeds the noise band limit")
            c = c[:n_modes]
        out = np.zeros(n_modes)
        out[: len(c)] = c
        return out
    if f.coeffs is not None and f.basis == basis and len(f.coeffs) > n_modes:
        tail = f.coeffs[n_modes:]
        if float(tail @ tail) > 1e-20 * max(f.norm2(), 1e-300):
            raise ValueError("integrand exceeds the noise band limit")
    return basis_coeffs(f, basis, n_modes)


def eval_functional(noise: NoiseRealization, f: L2Element, j: int) -> float:
    """Slice-j increment against the test function: sum_n <f,e_n> dW_{j,n}."""
    if not 0 <= j < noise.partition.n_slices:
        raise ValueError(f"slice index {j} out of range")
    c = _mode_vector(f, noise.basis, noise.n_modes)
    return float(c @ noise.increments[j])


# ---------------------------------------------------------------------------
# Elementary integrands and their stochastic integral
# ---------------------------------------------------------------------------

#: adapted coefficient callback: (set index, slice index, strictly-prior
#: increments with shape (paths, j, n_modes)) -> per-path values (paths,)
AdaptedCoeff = Callable[[int, int, Array], Array]


@dataclass(frozen=True)
class ElementaryField:
    """Piecewise-constant integrand sum_ij X_ij 1_{A_i} 1_{[t_j, t_j+1)}.

    Spatial sets are exact interval unions and must be pairwise disjoint.
    Coefficients are either an (n_sets, n_slices) array of constants or an
    adapted callback that is handed only strictly prior increments.
    """

    sets: tuple[iv.IntervalSet, ...]
    partition: TimePartition
    coefficients: Array | AdaptedCoeff

    def __post_init__(self):
        if not self.sets:
            raise ValueError("need at least one spatial set")
        if not iv.disjoint(self.sets):
            raise ValueError("spatial sets must be pairwise disjoint")
        for s in self.sets:
            if not s:
                raise ValueError("spatial sets must be nonempty")
        if isinstance(self.coefficients, np.ndarray):
            want = (len(self.sets), self.partition.n_slices)
            if self.coefficients.shape != want:
                raise ValueError(f"coefficients must have shape {want}")

    @property
    def is_deterministic(self) -> bool:
        return isinstance(self.coefficients, np.ndarray)

    def set_mode_matrix(self, basis: Basis, n_modes: int) -> Array:
        """(n_sets, n_modes) exact coefficients of the set indicators."""
        return np.array(
            [
                [
                    sum(basis.indicator_coeff(n, a, b) for a, b in s)
                    for n in range(n_modes)
                ]
                for s in self.sets
            ]
        )

    def exact_sq_norm(self) -> float | None:
        """integral of f^2 dt dmu for constant coefficients (exact measures)."""
        if not self.is_deterministic:
            return None
        mus = np.array([iv.measure(s) for s in self.sets])
        x = self.coefficients
        return float(np.einsum("ij,j,i->", x**2, self.partition.dts, mus))


def _coefficient_tensor(
    field: ElementaryField, increments: Array
) -> Array:
    """(paths, n_slices, n_sets) coefficient values, adaptedness enforced."""
    n_paths, m, _ = increments.shape
    n_sets = len(field.sets)
    if field.is_deterministic:
        x = np.broadcast_to(
            field.coefficients.T[None, :, :], (n_paths, m, n_sets)
        )
        return x
    out = np.empty((n_paths, m, n_sets))
    for j in range(m):
        past = increments[:, :j, :].view()
        past.flags.writeable = False  # structural adaptedness: no peeking, no edits
        for i in range(n_sets):
            vals = np.asarray(field.coefficients(i, j, past), dtype=float)
            out[:, j, i] = vals
    return out


def integrate_elementary_ensemble(
    field: ElementaryField, increments: Array, basis: Basis
) -> Array:
    """Stochastic integral per path for an (paths, m, n_modes) ensemble."""
    if increments.shape[1] != field.partition.n_slices:
        raise ValueError("field partition does not match the noise partition")
    n_modes = increments.shape[2]
    cset = field.set_mode_matrix(basis, n_modes)
    set_inc = np.einsum("pjm,im->pji", increments, cset)
    x = _coefficient_tensor(field, increments)
    return np.einsum("pji,pji->p", x, set_inc)


def integrate_elementary(field: ElementaryField, noise: NoiseRealization) -> float:
    """sum_ij X_ij (W(t_{j+1}, 1_{A_i}) - W(t_j, 1_{A_i})) for one path."""
    vals = integrate_elementary_ensemble(
        field, noise.increments[None, :, :], noise.basis
    )
    return float(vals[0])


@dataclass(frozen=True)
class IsometryReport:
    sq_norm: float           # ||f||^2 at the noise resolution
    exact_sq_norm: float | None
    lo_bound: float          # sigma_lo2 * sq_norm
    hi_bound: float          # sigma_hi2 * sq_norm
    inf_estimate: float
    sup_estimate: float
    inf_std_error: float
    sup_std_error: float
    argmax_index: int
    argmin_index: int
    se_mult: float

    @property
    def passed(self) -> bool:
        return (
            self.inf_estimate >= self.lo_bound - self.se_mult * self.inf_std_error
            and self.sup_estimate <= self.hi_bound + self.se_mult * self.sup_std_error
        )


def isometry_report(
    field: ElementaryField,
    basis: Basis,
    n_modes: int,
    band: VolBand,
    scenarios: Sequence[ScenarioPath],
    n_paths: int,
    seed: int,
    se_mult: float = 3.0,
) -> IsometryReport:
    """Scenario sweep of E[I(f)^2] against the band isometry bounds.

    The reference squared norm is evaluated at the noise resolution (the
    Gram of the projected set indicators), which for band-limited or
    partition-aligned integrands equals the exact integral of f^2; any
    projection defect of the spatial sets would otherwise be misread as an
    isometry violation.  For random coefficients the norm is the scenario
    sup of the sampled mean.
    """
    scenarios = list(scenarios)
    if not scenarios:
        raise ValueError("empty scenario enumeration")
    cset = field.set_mode_matrix(basis, n_modes)
    gset = cset @ cset.T

    means = np.empty(len(scenarios))
    ses = np.empty(len(scenarios))
    norms = np.empty(len(scenarios))
    for s, scen in enumerate(scenarios):
        inc = sample_noise_ensemble(
            field.partition, basis, n_modes, scen, n_paths, seed
        )
        vals = integrate_elementary_ensemble(field, inc, basis) ** 2
        means[s] = vals.mean()
        ses[s] = vals.std(ddof=1) / math.sqrt(n_paths)
        x = _coefficient_tensor(field, inc)
        per_slice = np.einsum("pji,ik,pjk->pj", x, gset, x)
        norms[s] = float((per_slice @ field.partition.dts).mean())
    sq_norm = float(norms.max())

    hi = int(np.argmax(means))
    lo = int(np.argmin(means))
    return IsometryReport(
        sq_norm=sq_norm,
        exact_sq_norm=field.exact_sq_norm(),
        lo_bound=band.sigma_lo2 * sq_norm,
        hi_bound=band.sigma_hi2 * sq_norm,
        inf_estimate=float(means[lo]),
        sup_estimate=float(means[hi]),
        inf_std_error=float(ses[lo]),
        sup_std_error=float(ses[hi]),
        argmax_index=hi,
        argmin_index=lo,
        se_mult=se_mult,
    )


# ---------------------------------------------------------------------------
# Infinite-dimensional path and its integral
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdGBMPath:
    """Operator-embedded path with its square-norm process.

    Mode coordinates of the embedded path at partition point l are
    a_n * W(t_l, e_n) for the first operator.n_max modes; the un-embedded
    series is exposed only through raw mode paths, never as a function.
    """

    operator: HSOperator
    noise: NoiseRealization
    mode_paths: Array      # (n_slices+1, n_max) raw W(t_l, e_n)
    embedded: Array        # (n_slices+1, n_max) a_n W(t_l, e_n)
    norm_process: Array    # (n_slices+1,)

    def as_element(self, l: int) -> L2Element:
        return L2Element.from_coeffs(self.noise.basis, self.embedded[l])


def idgbm_path(q: HSOperator, noise: NoiseRealization) -> IdGBMPath:
    if q.n_max > noise.n_modes:
        raise ValueError(
            f"operator truncation {q.n_max} exceeds noise modes {noise.n_modes}"
        )
    w = noise.mode_paths()[:, : q.n_max]
    embedded = w * q.eigenvalues[None, :]
    return IdGBMPath(
        operator=q,
        noise=noise,
        mode_paths=w,
        embedded=embedded,
        norm_process=(embedded**2).sum(axis=1),
    )


def norm_process_ensemble(
    q: HSOperator, increments: Array
) -> Array:
    """(paths, n_slices+1) square-norm processes from an increment ensemble."""
    if q.n_max > increments.shape[2]:
        raise ValueError("operator truncation exceeds noise modes")
    w = np.cumsum(increments[:, :, : q.n_max], axis=1)
    w = np.concatenate([np.zeros((len(w), 1, q.n_max)), w], axis=1)
    return ((w * q.eigenvalues[None, None, :]) ** 2).sum(axis=2)


def integrate_idgbm_ensemble(
    slice_coeffs: Array, increments: Array
) -> Array:
    """Integral of a piecewise-constant mode-coefficient path, per path.

    slice_coeffs: (n_slices, n_coeff) coefficients of f on each slice;
    increments: (paths, n_slices, n_modes) with n_coeff <= n_modes.
    """
    m, n_coeff = slice_coeffs.shape
    if increments.shape[1] != m:
        raise ValueError("integrand partition does not match the noise")
    if n_coeff > increments.shape[2]:
        raise ValueError("integrand exceeds the noise band limit")
    return np.einsum("jn,pjn->p", slice_coeffs, increments[:, :, :n_coeff])


def integrate_idgbm(
    f_slices: Sequence[L2Element] | Array,
    noise: NoiseRealization,
    band: VolBand | None = None,
) -> tuple[float, float]:
    """Stochastic integral against the infinite-dimensional path (one path).

    Returns (value, tail_bound) where tail_bound = sigma_hi2 * sum_j dt_j *
    (|f_j|^2 - |P_N f_j|^2) controls the discarded modes (zero for
    band-limited integrands; requires exact-norm representations).
    """
    if isinstance(f_slices, np.ndarray):
        coeff_rows = np.asarray(f_slices, dtype=float)
        exact_norms = None
    else:
        coeff_rows = np.array(
            [_mode_vector(f, noise.basis, noise.n_modes) for f in f_slices]
        )
        exact_norms = np.array([f.norm2() for f in f_slices])
    if coeff_rows.shape[0] != noise.partition.n_slices:
        raise ValueError("need one integrand value per slice")
    if coeff_rows.shape[1] > noise.n_modes:
        tail = coeff_rows[:, noise.n_modes:]
        if float((tail * tail).sum()) > 1e-20:
            raise ValueError("integrand exceeds the noise band limit")
        coeff_rows = coeff_rows[:, : noise.n_modes]
    value = float(
        integrate_idgbm_ensemble(coeff_rows, noise.increments[None, :, :])[0]
    )
    sigma_hi2 = band.sigma_hi2 if band is not None else noise.scenario.band.sigma_hi2
    if exact_norms is None:
        tail_bound = 0.0
    else:
        defects = np.clip(exact_norms - (coeff_rows**2).sum(axis=1), 0.0, None)
        tail_bound = float(sigma_hi2 * (defects @ noise.partition.dts))
    return value, tail_bound


# ---------------------------------------------------------------------------
# Portable dump/load
# ---------------------------------------------------------------------------

_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % (x,)


def dump_noise(noise: NoiseRealization, csv_path, meta_path) -> None:
    """Write increments as slice,mode,increment CSV plus a key-value sidecar."""
    with open(csv_path, "w", newline="") as fh:
        fh.write("slice,mode,increment\n")
        m, n = noise.increments.shape
        for j in range(m):
            row = noise.increments[j]
            for k in range(n):
                fh.write(f"{j},{k},{_fmt(row[k])}\n")
    meta = {
        "partition": " ".join(_fmt(t) for t in noise.partition.times),
        "band_sigma_lo2": _fmt(noise.scenario.band.sigma_lo2),
        "band_sigma_hi2": _fmt(noise.scenario.band.sigma_hi2),
        "scenario_grid": " ".join(_fmt(t) for t in noise.scenario.time_grid),
        "scenario_values": " ".join(_fmt(v) for v in noise.scenario.values),
        "basis_kind": noise.basis.kind,
        "basis_cells": str(noise.basis.n_cells),
        "space_length": _fmt(noise.basis.space.length),
        "space_n_quad": str(noise.basis.space.n_quad),
        "n_modes": str(noise.n_modes),
        "seed": "" if noise.seed is None else str(noise.seed),
    }
    with open(meta_path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={v}\n")


def load_noise(csv_path, meta_path) -> NoiseRealization:
    meta = {}
    with open(meta_path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            k, _, v = line.partition("=")
            meta[k] = v
    from .hilbert import MeasureSpace  # local to avoid cycle at import time

    space = MeasureSpace(float(meta["space_length"]), int(meta["space_n_quad"]))
    basis = Basis(space, meta["basis_kind"], int(meta["basis_cells"]))
    partition = TimePartition(
        np.array([float(t) for t in meta["partition"].split()])
    )
    band = VolBand(float(meta["band_sigma_lo2"]), float(meta["band_sigma_hi2"]))
    scenario = ScenarioPath(
        np.array([float(t) for t in meta["scenario_grid"].split()]),
        np.array([float(v) for v in meta["scenario_values"].split()]),
        band,
    )
    n_modes = int(meta["n_modes"])
    inc = np.zeros((partition.n_slices, n_modes))
    with open(csv_path) as fh:
        header = fh.readline().rstrip("\n")
        if header != "slice,mode,increment":
            raise ValueError(f"unexpected CSV header {header!r}")
        for line in fh:
            j_s, k_s, v_s = line.rstrip("\n").split(",")
            inc[int(j_s), int(k_s)] = float(v_s)
    seed = int(meta["seed"]) if meta.get("seed") else None
    return NoiseRealization(partition, basis, n_modes, scenario, inc, seed=seed)
