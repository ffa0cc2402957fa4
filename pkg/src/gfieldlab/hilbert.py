"""Parameter Hilbert space on an interval: quadrature, bases, Gram matrices.

Elements carry one of three representations -- samples on the quadrature
grid, coefficients in a named basis, or an exact union of intervals (for
indicators).  Inner products pick the most exact route available: interval
algebra for indicator pairs, closed-form antiderivatives for indicator vs
trigonometric coefficients, coefficient dot products within one basis, and
trapezoid quadrature as the general fallback.  Uniform trapezoid weights
are spectrally accurate for the periodic integrands used everywhere here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import SpaceMismatchError
from . import intervals as iv

Array = np.ndarray
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MeasureSpace:
    """Interval [0, length] with a uniform trapezoid quadrature rule."""

    length: float = TWO_PI
    n_quad: int = 512

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("length must be positive")
        if self.n_quad < 16:
            raise ValueError("n_quad must be at least 16")

    @cached_property
    def grid(self) -> Array:
        return np.linspace(0.0, self.length, self.n_quad)

    @cached_property
    def weights(self) -> Array:
        h = self.length / (self.n_quad - 1)
        w = np.full(self.n_quad, h)
        w[0] = w[-1] = 0.5 * h
        return w

    @property
    def band_limit(self) -> int:
        return self.n_quad // 4

    def quad(self, values: Array) -> float:
        return float(values @ self.weights)


@dataclass(frozen=True)
class Basis:
    """Orthonormal family on a MeasureSpace.

    kind 'cosine':   e_0 = 1/sqrt(L), e_n = sqrt(2/L) cos(2 pi n x / L)
    kind 'full-trig': e_0, then pairs sqrt(2/L) sin / cos of frequency k
                      at indices 2k-1 / 2k
    kind 'indicator-partition': normalized indicators of n_cells equal cells

    On the default space of length 2 pi the trig normalizations reduce to
    1/sqrt(2 pi) and cos(n x)/sqrt(pi) etc.
    """

    space: MeasureSpace
    kind: str = "cosine"
    n_cells: int = 0  # indicator-partition only

    def __post_init__(self):
        if self.kind not in ("cosine", "full-trig", "indicator-partition"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "indicator-partition" and self.n_cells < 1:
            raise ValueError("indicator-partition basis needs n_cells >= 1")

    @property
    def size_limit(self) -> int:
        if self.kind == "indicator-partition":
            return self.n_cells
        if self.kind == "cosine":
            return self.space.band_limit + 1
        return 2 * self.space.band_limit + 1

    def frequency(self, i: int) -> int:
        """Trig frequency index of basis element i (0 for the constant)."""
        if self.kind == "cosine":
            return i
        if self.kind == "full-trig":
            return (i + 1) // 2
        raise ValueError("frequency undefined for indicator-partition basis")

    def evaluate(self, i: int, x: Array) -> Array:
        L = self.space.length
        x = np.asarray(x, dtype=float)
        if i < 0 or i >= self.size_limit:
            raise ValueError(f"basis index {i} outside [0, {self.size_limit})")
        if self.kind == "indicator-partition":
            w = L / self.n_cells
            inside = (x >= i * w) & (x < (i + 1) * w)
            if i == self.n_cells - 1:
                inside |= x == L
            return inside / math.sqrt(w)
        if i == 0:
            return np.full_like(x, 1.0 / math.sqrt(L))
        k = self.frequency(i)
        omega = 2.0 * math.pi * k / L
        amp = math.sqrt(2.0 / L)
        if self.kind == "cosine" or i % 2 == 0:
            return amp * np.cos(omega * x)
        return amp * np.sin(omega * x)

    def element(self, i: int) -> "L2Element":
        c = np.zeros(i + 1)
        c[i] = 1.0
        return L2Element(self.space, basis=self, coeffs=c)

    def indicator_coeff(self, i: int, a: float, b: float) -> float:
        """Exact <1_[a,b], e_i> via antiderivatives (trig) or overlap."""
        L = self.space.length
        if self.kind == "indicator-partition":
            w = L / self.n_cells
            lo, hi = max(a, i * w), min(b, (i + 1) * w)
            return max(hi - lo, 0.0) / math.sqrt(w)
        if i == 0:
            return (b - a) / math.sqrt(L)
        k = self.frequency(i)
        omega = 2.0 * math.pi * k / L
        amp = math.sqrt(2.0 / L)
        if self.kind == "cosine" or i % 2 == 0:
            return amp * (math.sin(omega * b) - math.sin(omega * a)) / omega
        return amp * (math.cos(omega * a) - math.cos(omega * b)) / omega


def cosine_basis(space: MeasureSpace) -> Basis:
    return Basis(space, "cosine")


def full_trig_basis(space: MeasureSpace) -> Basis:
    return Basis(space, "full-trig")


@dataclass(frozen=True)
class L2Element:
    """Square-integrable element in one of three exact-aware forms."""

    space: MeasureSpace
    values: Array | None = None
    basis: Basis | None = None
    coeffs: Array | None = None
    intervals: iv.IntervalSet | None = None

    def __post_init__(self):
        forms = (self.values is not None, self.coeffs is not None,
                 self.intervals is not None)
        if sum(forms) != 1:
            raise ValueError("element needs exactly one representation")
        if self.coeffs is not None:
            if self.basis is None:
                raise ValueError("coefficient form needs a basis")
            object.__setattr__(
                self, "coeffs", np.asarray(self.coeffs, dtype=float)
            )
        if self.values is not None:
            v = np.asarray(self.values, dtype=float)
            if v.shape != (self.space.n_quad,):
                raise ValueError(
                    f"grid form needs shape ({self.space.n_quad},), got {v.shape}"
                )
            object.__setattr__(self, "values", v)
        if self.intervals is not None:
            for a, b in self.intervals:
                if a < -1e-12 or b > self.space.length + 1e-12:
                    raise ValueError("interval outside the measure space")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def from_grid(space: MeasureSpace, values: Array) -> "L2Element":
        return L2Element(space, values=np.asarray(values, dtype=float))

    @staticmethod
    def from_function(space: MeasureSpace, fn) -> "L2Element":
        return L2Element.from_grid(space, fn(space.grid))

    @staticmethod
    def from_coeffs(basis: Basis, coeffs: Array) -> "L2Element":
        return L2Element(basis.space, basis=basis, coeffs=coeffs)

    @staticmethod
    def indicator(space: MeasureSpace, pairs) -> "L2Element":
        return L2Element(space, intervals=iv.interval_set(pairs))

    # -- views --------------------------------------------------------------

    def on_grid(self) -> Array:
        if self.values is not None:
            return self.values
        if self.coeffs is not None:
            x = self.space.grid
            out = np.zeros_like(x)
            for i, c in enumerate(self.coeffs):
                if c != 0.0:
                    out += c * self.basis.evaluate(i, x)
            return out
        out = np.zeros_like(self.space.grid)
        for a, b in self.intervals:
            out[(self.space.grid >= a) & (self.space.grid <= b)] = 1.0
        return out

    def norm2(self) -> float:
        """Exact squared norm where the representation allows it."""
        if self.intervals is not None:
            return iv.measure(self.intervals)
        if self.coeffs is not None:
            return float(self.coeffs @ self.coeffs)
        v = self.on_grid()
        return self.space.quad(v * v)

    def norm(self) -> float:
        return math.sqrt(max(self.norm2(), 0.0))


def inner(h: L2Element, k: L2Element) -> float:
    """<h, k> by the most exact route the two representations allow."""
    if h.space != k.space:
        raise SpaceMismatchError("elements live on different measure spaces")
    if h.intervals is not None and k.intervals is not None:
        return iv.measure(iv.intersect(h.intervals, k.intervals))
    if h.intervals is not None and k.coeffs is not None:
        return _inner_indicator_coeffs(h, k)
    if k.intervals is not None and h.coeffs is not None:
        return _inner_indicator_coeffs(k, h)
    if (
        h.coeffs is not None
        and k.coeffs is not None
        and h.basis == k.basis
    ):
        n = min(len(h.coeffs), len(k.coeffs))
        return float(h.coeffs[:n] @ k.coeffs[:n])
    return h.space.quad(h.on_grid() * k.on_grid())


def _inner_indicator_coeffs(ind: L2Element, ce: L2Element) -> float:
    total = 0.0
    for i, c in enumerate(ce.coeffs):
        if c != 0.0:
            total += c * sum(
                ce.basis.indicator_coeff(i, a, b) for a, b in ind.intervals
            )
    return total


def gram(elements) -> Array:
    """Symmetric Gram matrix of pairwise inner products."""
    elements = list(elements)
    if not elements:
        raise ValueError("gram of an empty family")
    n = len(elements)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = inner(elements[i], elements[j])
    return 0.5 * (g + g.T)


def coeffs(h: L2Element, basis: Basis, n: int) -> Array:
    """First n generalized Fourier coefficients <h, e_i>, i = 0..n-1."""
    if n < 1:
        raise ValueError("need at least one coefficient")
    if n > basis.size_limit:
        raise ValueError(
            f"requested {n} coefficients beyond the band limit {basis.size_limit}"
        )
    if h.coeffs is not None and h.basis == basis:
        out = np.zeros(n)
        m = min(n, len(h.coeffs))
        out[:m] = h.coeffs[:m]
        return out
    if h.intervals is not None:
        return np.array(
            [
                sum(basis.indicator_coeff(i, a, b) for a, b in h.intervals)
                for i in range(n)
            ]
        )
    v = h.on_grid()
    w = basis.space.weights
    return np.array(
        [float((v * basis.evaluate(i, basis.space.grid)) @ w) for i in range(n)]
    )


def reconstruct(basis: Basis, coeff_vec: Array) -> L2Element:
    return L2Element.from_coeffs(basis, np.asarray(coeff_vec, dtype=float))


def parseval_defect(h: L2Element, basis: Basis, n: int) -> float:
    """|h|^2 - sum of the first n squared coefficients (Bessel residual)."""
    c = coeffs(h, basis, n)
    return h.norm2() - float(c @ c)


@dataclass(frozen=True)
class HSOperator:
    """Diagonal operator on the first len(eigenvalues) basis elements.

    tail_sq is the analytic remainder sum of squared eigenvalues beyond the
    stored truncation, supplied by the named family rule so convergence
    bounds can include it exactly.
    """

    eigenvalues: Array
    tail_sq: float = 0.0
    name: str = ""

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1 or len(ev) == 0:
            raise ValueError("eigenvalues must be a nonempty vector")
        if self.tail_sq < 0:
            raise ValueError("tail_sq must be nonnegative")
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def n_max(self) -> int:
        return len(self.eigenvalues)

    def sum_sq(self) -> float:
        return float(self.eigenvalues @ self.eigenvalues) + self.tail_sq


def hs_one_over_n(n_max: int) -> HSOperator:
    """a_n = 1/n on the n-th basis element; total square sum pi^2/6."""
    n = np.arange(1, n_max + 1, dtype=float)
    partial = float(np.sum(1.0 / n**2))
    return HSOperator(1.0 / n, tail_sq=math.pi**2 / 6.0 - partial, name="one_over_n")


def hs_identity(n_max: int) -> HSOperator:
    return HSOperator(np.ones(n_max), tail_sq=0.0, name="identity")


def hs_apply(q: HSOperator, f: L2Element, basis: Basis) -> L2Element:
    """Diagonal action sum_n a_n <f, e_n> e_n, truncated at the operator."""
    c = coeffs(f, basis, q.n_max)
    if f.coeffs is not None and f.basis == basis and len(f.coeffs) > q.n_max:
        extra = f.coeffs[q.n_max:]
        if float(extra @ extra) > 1e-24:
            raise ValueError("element exceeds the operator band limit")
    return L2Element.from_coeffs(basis, q.eigenvalues * c)
