"""Exact algebra on finite unions of intervals of the line.

Interval sets are tuples of disjoint, nonempty, sorted (a, b) pairs with
a < b.  Keeping indicator-type objects in this form lets set-indexed
identities be checked with exact measure arithmetic instead of quadrature.
"""

from __future__ import annotations

import math
from collections.abc import Iterable

IntervalSet = tuple[tuple[float, float], ...]


def interval_set(pairs: Iterable[tuple[float, float]]) -> IntervalSet:
    """Normalize to sorted disjoint intervals; merges touching pieces."""
    cleaned = []
    for a, b in pairs:
        a, b = float(a), float(b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"interval endpoints must be finite, got ({a}, {b})")
        if b <= a:
            raise ValueError(f"empty or inverted interval ({a}, {b})")
        cleaned.append((a, b))
    cleaned.sort()
    merged: list[tuple[float, float]] = []
    for a, b in cleaned:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return tuple(merged)


def measure(s: IntervalSet) -> float:
    return sum(b - a for a, b in s)


def intersect(s: IntervalSet, t: IntervalSet) -> IntervalSet:
    """Intersection by linear sweep over the two sorted lists."""
    out = []
    i = j = 0
    while i < len(s) and j < len(t):
        a = max(s[i][0], t[j][0])
        b = min(s[i][1], t[j][1])
        if a < b:
            out.append((a, b))
        if s[i][1] <= t[j][1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def union(sets: Iterable[IntervalSet]) -> IntervalSet:
    pairs = [p for s in sets for p in s]
    if not pairs:
        return ()
    return interval_set(pairs)


def disjoint(sets: Iterable[IntervalSet]) -> bool:
    sets = list(sets)
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if intersect(sets[i], sets[j]):
                return False
    return True
