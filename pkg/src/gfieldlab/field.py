"""Finite-dimensional distributions of the band-uncertain Gaussian field.

A family of parameters pins down a distribution through its Gram matrix and
the band; per-scenario sampling, the orthonormal-expansion surrogate of a
single parameter, and the set-indexed inclusion-exclusion identity all
operate on that data.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from . import intervals as iv
from .hilbert import L2Element, Basis, gram as build_gram, coeffs as build_coeffs
from .scenarios import VolBand, GFunction, g_scalar
from .seeding import standard_normal_paths

Array = np.ndarray


@dataclass(frozen=True)
class FieldDistribution:
    """Joint law of the field at finitely many parameters."""

    gram: Array
    gfun: GFunction

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=float)
        if g.shape != self.gfun.gram.shape or not np.allclose(
            g, self.gfun.gram, rtol=0.0, atol=0.0
        ):
            raise ValueError("gram and GFunction gram must coincide")

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @property
    def band(self) -> VolBand:
        return self.gfun.band

    def variance_band(self) -> tuple[float, float]:
        """For one-dimensional distributions: |h|^2 [sigma_lo2, sigma_hi2]."""
        if self.dim != 1:
            raise ValueError("variance_band is for 1D distributions")
        nh2 = float(self.gram[0, 0])
        return nh2 * self.band.sigma_lo2, nh2 * self.band.sigma_hi2


def fdd(params: Sequence[L2Element], band: VolBand) -> FieldDistribution:
    """Finite-dimensional distribution of the field at the given parameters."""
    params = list(params)
    if not params:
        raise ValueError("empty parameter family")
    g = build_gram(params)
    return FieldDistribution(gram=g, gfun=GFunction(g, band))


def psd_factor(g: Array, tol: float = 1e-10) -> Array:
    """Matrix L with L L^T = g, tolerant of rank deficiency.

    Eigendecomposition square root: eigenvalues in [-tol*|g|, 0] clip to 0,
    anything lower raises.  Exactly reproduces degenerate correlations
    (duplicated parameters give identical sample coordinates).
    """
    g = np.asarray(g, dtype=float)
    w, v = np.linalg.eigh(g)
    scale = max(abs(w).max(), 1e-300)
    if w.min() < -tol * scale:
        raise ValueError(f"matrix not PSD within tolerance: {w.min():g}")
    return v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def sample_given_theta(
    dist: FieldDistribution, theta: float, n_paths: int, seed: int
) -> Array:
    """(n_paths, n) draws of N(0, theta * gram) under one scenario value.

    Base normals follow the block-seeding contract, so different theta reuse
    the same underlying draws (common random numbers).
    """
    if not dist.band.contains(theta):
        raise ValueError(
            f"theta={theta} outside band "
            f"[{dist.band.sigma_lo2}, {dist.band.sigma_hi2}]"
        )
    factor = psd_factor(dist.gram)
    z = standard_normal_paths(seed, n_paths, (dist.dim,))
    return np.sqrt(theta) * z @ factor.T


@dataclass(frozen=True)
class ExpansionSurrogate:
    """1D distribution of the truncated orthonormal expansion of h."""

    dist: FieldDistribution
    coeffs: Array
    proj_norm2: float
    defect: float

    def variance_band(self) -> tuple[float, float]:
        return self.dist.variance_band()


def expansion_surrogate(
    h: L2Element, basis: Basis, n: int, band: VolBand
) -> ExpansionSurrogate:
    """Distribution of sum_{i<n} <h,e_i> W_{e_i}.

    The partial sum is again 1D normal with variance band |P_n h|^2 times
    the band; the Bessel defect |h|^2 - |P_n h|^2 quantifies what the
    truncation left out.
    """
    c = build_coeffs(h, basis, n)
    proj = float(c @ c)
    g = np.array([[proj]])
    dist = FieldDistribution(gram=g, gfun=GFunction(g, band))
    return ExpansionSurrogate(
        dist=dist, coeffs=c, proj_norm2=proj, defect=h.norm2() - proj
    )


# ---------------------------------------------------------------------------
# Set-indexed field and the inclusion-exclusion identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SetFamily:
    """Finitely many finite-measure interval unions inside [0, length]."""

    members: tuple[iv.IntervalSet, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty set family")
        for s in self.members:
            if not s:
                raise ValueError("family members must be nonempty")
            if not np.isfinite(iv.measure(s)):
                raise ValueError("family members must have finite measure")

    @staticmethod
    def of(*interval_lists) -> "SetFamily":
        return SetFamily(tuple(iv.interval_set(p) for p in interval_lists))

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class UnionCheckReport:
    union_measure: float
    signed_variance_coeff: float
    max_g_deviation: float
    mc_worst_sigma_gap: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            abs(self.signed_variance_coeff - self.union_measure) <= self.tol
            and self.max_g_deviation <= self.tol
            and self.mc_worst_sigma_gap <= 5.0
        )


def union_identity_check(
    family: SetFamily,
    band: VolBand,
    n_paths: int = 20000,
    seed: int = 0,
    n_random: int = 20,
    tol: float = 1e-12,
) -> UnionCheckReport:
    """Inclusion-exclusion distribution identity for the set-indexed field.

    Builds the 2^n - 1 vector of all nonempty intersections, the exact Gram
    of their indicators, and the signed alternating combination.  Checks
    (i) the quadratic-form coefficient equals mu(union) exactly, (ii) the
    two scalar sublinear functions agree on random arguments, and (iii) for
    each band edge theta, the sampled variance of the signed combination
    matches theta * mu(union) within 5 standard errors.
    """
    n = len(family)
    if n > 4:
        raise ValueError(
            "inclusion-exclusion check materializes 2^n - 1 sets; n <= 4 only"
        )
    masks = list(range(1, 2**n))
    inter: dict[int, iv.IntervalSet] = {}
    for mask in masks:
        parts = [family.members[i] for i in range(n) if (mask >> i) & 1]
        s = parts[0]
        for p in parts[1:]:
            s = iv.intersect(s, p)
        inter[mask] = s
    dim = len(masks)
    g = np.empty((dim, dim))
    for a, ma in enumerate(masks):
        for b, mb in enumerate(masks):
            g[a, b] = iv.measure(inter[ma | mb])
    signs = np.array([(-1.0) ** (bin(m).count("1") + 1) for m in masks])
    coeff = float(signs @ g @ signs)
    mu_union = iv.measure(iv.union(family.members))

    rng = np.random.default_rng(seed)
    worst_g = 0.0
    for _ in range(n_random):
        alpha = float(rng.standard_normal())
        lhs = g_scalar(band, alpha * coeff)
        rhs = g_scalar(band, alpha * mu_union)
        worst_g = max(worst_g, abs(lhs - rhs))

    factor = psd_factor(g)
    worst_gap = 0.0
    for k, theta in enumerate((band.sigma_lo2, band.sigma_hi2)):
        z = standard_normal_paths(seed + 1 + k, n_paths, (dim,))
        x = np.sqrt(theta) * z @ factor.T
        combo = x @ signs
        var = float(combo.var(ddof=1))
        se = var * np.sqrt(2.0 / (n_paths - 1))
        target = theta * mu_union
        if se > 0:
            worst_gap = max(worst_gap, abs(var - target) / se)
    return UnionCheckReport(
        union_measure=mu_union,
        signed_variance_coeff=coeff,
        max_g_deviation=worst_g,
        mc_worst_sigma_gap=worst_gap,
        tol=tol,
    )
