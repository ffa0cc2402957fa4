"""Finite-difference oracle for expectations of band-uncertain normals.

The upper expectation of phi(X) for X ~ N(0, T * [sigma_lo2, sigma_hi2])
solves the fully nonlinear heat equation du/dt = G(d2u/dx2) started from
phi; the solver below marches it with an explicit monotone scheme (central
second differences, the scalar sublinear function applied pointwise), which
converges to the viscosity solution under the CFL restriction.  A 2D
variant covers pair distributions with a single scalar volatility control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .scenarios import VolBand, GFunction, g_scalar_array

Array = np.ndarray


@dataclass(frozen=True)
class PayoffSpec:
    """Test functional with a declared polynomial growth bound.

    growth_degree k declares |phi(x)| <= C (1 + |x|^k); it feeds the
    truncation rule that makes the finite domain safe.
    """

    evaluator: Callable[..., Array]
    growth_degree: int = 2

    def __post_init__(self):
        if self.growth_degree < 0:
            raise ValueError("growth_degree must be >= 0")


@dataclass(frozen=True)
class PDEGrid:
    half_width: float
    nx: int
    dt: float
    T: float

    def __post_init__(self):
        if self.half_width <= 0 or self.nx < 3 or self.dt <= 0 or self.T <= 0:
            raise ValueError("grid parameters must be positive (nx >= 3)")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.nx - 1)

    def validate(self, band: VolBand, dim: int, growth_degree: int = 0) -> None:
        cfl = self.dx**2 / (dim * band.sigma_hi2) if band.sigma_hi2 > 0 else np.inf
        if self.dt > cfl * (1 + 1e-12):
            raise ValueError(
                f"CFL violation: dt={self.dt:g} > dx^2/(d*sigma_hi2)={cfl:g}"
            )
        pad = 6.0 * band.sigma_hi * math.sqrt(self.T)
        if self.half_width < pad - 1e-12:
            raise ValueError(
                f"half_width {self.half_width:g} below 6*sigma_hi*sqrt(T)={pad:g}"
            )

    @staticmethod
    def auto(
        band: VolBand,
        T: float,
        dim: int = 1,
        nx: int = 481,
        safety: float = 0.8,
        pad_sigmas: float = 6.0,
    ) -> "PDEGrid":
        """Grid obeying the truncation and CFL rules with a safety factor."""
        if nx % 2 == 0:
            nx += 1  # keep the origin on the grid
        half_width = max(pad_sigmas * band.sigma_hi * math.sqrt(T), 1.0)
        dx = 2.0 * half_width / (nx - 1)
        hi = max(band.sigma_hi2, 1e-12)
        dt = safety * dx**2 / (dim * hi)
        return PDEGrid(half_width=half_width, nx=nx, dt=dt, T=T)


def _check_finite(u: Array, step: int) -> None:
    if not np.all(np.isfinite(u)):
        raise FloatingPointError(f"non-finite PDE state at step {step}")


def solve_gheat_1d(
    band: VolBand, payoff: PayoffSpec, T: float, grid: PDEGrid
) -> float:
    """Upper expectation of payoff(X), X ~ N(0, T*[sigma_lo2, sigma_hi2]).

    Returns u(T, 0) of du/dt = g_scalar(band, u_xx) with u(0,.) = payoff,
    accurate to O(dt + dx^2).  Boundary second derivatives are copied from
    the adjacent interior node; the 6-sigma padding rule keeps that cheap
    choice harmless for payoffs of declared polynomial growth.
    """
    grid.validate(band, dim=1, growth_degree=payoff.growth_degree)
    x = np.linspace(-grid.half_width, grid.half_width, grid.nx)
    u = np.asarray(payoff.evaluator(x), dtype=float)
    if u.shape != x.shape or not np.all(np.isfinite(u)):
        raise ValueError("payoff must be finite and vectorized over the grid")
    steps = max(int(math.ceil(T / grid.dt - 1e-12)), 1)
    dt = T / steps
    inv_dx2 = 1.0 / grid.dx**2
    d2 = np.empty_like(u)
    for step in range(steps):
        d2[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv_dx2
        d2[0] = d2[1]
        d2[-1] = d2[-2]
        u += dt * g_scalar_array(band, d2)
        if step % 256 == 0:
            _check_finite(u, step)
    _check_finite(u, steps)
    return float(u[(grid.nx - 1) // 2])


def solve_gheat_2d(
    gf: GFunction, payoff: PayoffSpec, T: float, grid: PDEGrid
) -> float:
    """Upper expectation of payoff(X, Y) for the pair with Gram matrix gf.gram.

    Solves du/dt = g_scalar(band, tr(gram * D^2 u)) on a square truncated
    domain.  The cross derivative uses the diagonally-paired monotone
    stencil, which requires |g12| <= min(g11, g22).
    """
    gram = gf.gram
    if gram.shape != (2, 2):
        raise ValueError(f"need a 2x2 gram, got {gram.shape}")
    g11, g22, g12 = gram[0, 0], gram[1, 1], gram[0, 1]
    if abs(g12) > min(g11, g22) + 1e-12:
        raise ValueError("monotone stencil needs |<h,k>| <= min(|h|^2, |k|^2)")
    grid.validate(gf.band, dim=2, growth_degree=payoff.growth_degree)

    x = np.linspace(-grid.half_width, grid.half_width, grid.nx)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    u = np.asarray(payoff.evaluator(xx, yy), dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("payoff must be finite on the grid")

    # sharper stability bound than the generic CFL when a cross term is present
    diag_load = (g11 + g22 - abs(g12)) / grid.dx**2
    steps = max(int(math.ceil(T / grid.dt - 1e-12)), 1)
    dt = T / steps
    if dt * gf.band.sigma_hi2 * diag_load > 1.0 + 1e-12:
        raise ValueError("time step violates the monotonicity bound for this gram")

    inv_dx2 = 1.0 / grid.dx**2
    op = np.empty_like(u)
    for step in range(steps):
        interior = np.zeros((grid.nx - 2, grid.nx - 2))
        c = u[1:-1, 1:-1]
        e, w = u[2:, 1:-1], u[:-2, 1:-1]
        n, s = u[1:-1, 2:], u[1:-1, :-2]
        interior += g11 * (e - 2 * c + w) * inv_dx2
        interior += g22 * (n - 2 * c + s) * inv_dx2
        if g12 != 0.0:
            # diagonally-paired u_xy stencil; the pairing direction follows
            # the sign of g12 so every off-center weight stays nonnegative
            if g12 > 0:
                ne, sw = u[2:, 2:], u[:-2, :-2]
                cross = (ne + sw + 2 * c - e - w - n - s) * (0.5 * inv_dx2)
            else:
                nw, se = u[:-2, 2:], u[2:, :-2]
                cross = (e + w + n + s - nw - se - 2 * c) * (0.5 * inv_dx2)
            interior += 2.0 * g12 * cross
        op[1:-1, 1:-1] = interior
        op[0, :] = op[1, :]
        op[-1, :] = op[-2, :]
        op[:, 0] = op[:, 1]
        op[:, -1] = op[:, -2]
        u += dt * g_scalar_array(gf.band, op)
        if step % 64 == 0:
            _check_finite(u, step)
    _check_finite(u, steps)
    mid = (grid.nx - 1) // 2
    return float(u[mid, mid])


def gnormal_abs_moment(
    band: VolBand, norm_h: float, k: int, side: str = "upper"
) -> float:
    """Closed-form k-th absolute moment of a band-uncertain normal.

    upper: odd k -> 2 (k-1)!! (norm_h * sigma_hi)^k / sqrt(2 pi);
           even k ->   (k-1)!! (norm_h * sigma_hi)^k;
    lower: the same formulas with sigma_lo.
    """
    if k <= 0:
        raise ValueError(f"moment order k must be >= 1, got {k}")
    if side not in ("upper", "lower"):
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    if norm_h < 0:
        raise ValueError("norm_h must be >= 0")
    sigma = band.sigma_hi if side == "upper" else band.sigma_lo
    dfact = math.prod(range(k - 1, 0, -2)) if k > 1 else 1
    base = dfact * (norm_h * sigma) ** k
    if k % 2 == 1:
        return 2.0 * base / math.sqrt(2.0 * math.pi)
    return float(base)
