"""Deterministic CSV/JSON/SVG emission.

All floats print at 17 significant digits (lossless for float64), rows in
caller order, newline-only line endings, no timestamps: identical inputs
yield identical bytes.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np


def fmt17(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return "%.17g" % float(x)
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt17(v) for v in row) + "\n")


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not JSON-serializable: {type(o)}")

    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Minimal standalone SVG plots (SVG 1.1, no external references)
# ---------------------------------------------------------------------------

_SVG_HEAD = (
    '<?xml version="1.0" encoding="UTF-8"?>\n'
    '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
    'width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
)

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _scale(vals, lo, hi, out_lo, out_hi):
    vals = np.asarray(vals, dtype=float)
    span = hi - lo if hi > lo else 1.0
    return out_lo + (vals - lo) / span * (out_hi - out_lo)


def svg_line_plot(
    path,
    xs: np.ndarray,
    series: dict[str, np.ndarray],
    title: str = "",
    log_y: bool = False,
    width: int = 640,
    height: int = 420,
) -> None:
    xs = np.asarray(xs, dtype=float)
    margin = 50
    all_y = np.concatenate([np.asarray(v, dtype=float) for v in series.values()])
    if log_y:
        all_y = np.log10(np.maximum(all_y, 1e-300))
    ylo, yhi = float(all_y.min()), float(all_y.max())
    if yhi == ylo:
        yhi = ylo + 1.0
    xlo, xhi = float(xs.min()), float(xs.max())
    parts = [_SVG_HEAD.format(w=width, h=height)]
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="monospace" font-size="13">{title}</text>\n'
        )
    parts.append(
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="black"/>\n'
    )
    for i, (label, ys) in enumerate(series.items()):
        ys = np.asarray(ys, dtype=float)
        if log_y:
            ys = np.log10(np.maximum(ys, 1e-300))
        px = _scale(xs, xlo, xhi, margin, width - margin)
        py = _scale(ys, ylo, yhi, height - margin, margin)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        color = _COLORS[i % len(_COLORS)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>\n'
        )
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 14 * i + 10}" '
            f'font-family="monospace" font-size="11" fill="{color}">{label}</text>\n'
        )
    parts.append("</svg>\n")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("".join(parts))


def svg_heatmap(
    path,
    matrix: np.ndarray,
    title: str = "",
    width: int = 640,
    height: int = 420,
) -> None:
    """Row-major heatmap with a blue-white-red two-sided palette."""
    m = np.asarray(matrix, dtype=float)
    lo, hi = float(m.min()), float(m.max())
    span = max(hi - lo, 1e-300)
    margin = 40
    rows, cols = m.shape
    cw = (width - 2 * margin) / cols
    ch = (height - 2 * margin) / rows
    parts = [_SVG_HEAD.format(w=width, h=height)]
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="monospace" font-size="13">{title}</text>\n'
        )
    for i in range(rows):
        for j in range(cols):
            z = (m[i, j] - lo) / span
            r = int(255 * min(1.0, 2 * z))
            b = int(255 * min(1.0, 2 * (1 - z)))
            g = int(255 * (1 - abs(2 * z - 1)) * 0.9)
            parts.append(
                f'<rect x="{margin + j * cw:.2f}" y="{margin + i * ch:.2f}" '
                f'width="{cw + 0.5:.2f}" height="{ch + 0.5:.2f}" '
                f'fill="rgb({r},{g},{b})"/>\n'
            )
    parts.append("</svg>\n")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("".join(parts))
