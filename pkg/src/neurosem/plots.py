"""Minimal dependency-free SVG charts for experiment reports."""
from __future__ import annotations

from html import escape
from typing import Mapping, Sequence

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=64, right=24, top=40, bottom=56)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]


def _y_range(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    lo, hi = min(lo, 0.0), max(hi, 1.0) if hi <= 1.0 else hi
    return lo, hi if hi > lo else lo + 1.0


def _y_axis(lo: float, hi: float, to_y) -> list[str]:
    x0 = MARGIN["left"]
    out = [f'<line x1="{x0}" y1="{to_y(lo):.1f}" x2="{x0}" y2="{to_y(hi):.1f}" stroke="black"/>']
    for v in np.linspace(lo, hi, 6):
        y = to_y(v)
        out.append(f'<line x1="{x0 - 4}" y1="{y:.1f}" x2="{WIDTH - MARGIN["right"]}" y2="{y:.1f}" '
                   f'stroke="#ddd"/>')
        out.append(f'<text x="{x0 - 8}" y="{y + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    return out


def box_plot(groups: Mapping[str, Sequence[float]], title: str = "", ylabel: str = "",
             xlabel: str = "") -> str:
    """Box-and-whisker chart (quartiles, 1.5 IQR whiskers) of each named group."""
    names = list(groups)
    data = [np.asarray(groups[n], dtype=np.float64) for n in names]
    allv = np.concatenate(data) if data else np.zeros(0)
    lo, hi = _y_range(allv)
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    to_y = lambda v: bottom - (v - lo) / (hi - lo) * (bottom - top)  # noqa: E731
    parts = _frame(title, xlabel, ylabel) + _y_axis(lo, hi, to_y)
    slot = (WIDTH - MARGIN["left"] - MARGIN["right"]) / max(len(names), 1)
    for k, (name, v) in enumerate(zip(names, data)):
        cx = MARGIN["left"] + slot * (k + 0.5)
        color = PALETTE[k % len(PALETTE)]
        parts.append(f'<text x="{cx:.1f}" y="{bottom + 18}" text-anchor="middle">{escape(name)}</text>')
        v = v[np.isfinite(v)]
        if v.size == 0:
            continue
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        w_lo = v[v >= q1 - 1.5 * iqr].min()
        w_hi = v[v <= q3 + 1.5 * iqr].max()
        half = min(slot * 0.3, 40)
        parts.append(f'<line x1="{cx:.1f}" y1="{to_y(w_lo):.1f}" x2="{cx:.1f}" y2="{to_y(w_hi):.1f}" '
                     f'stroke="{color}"/>')
        parts.append(f'<rect x="{cx - half:.1f}" y="{to_y(q3):.1f}" width="{2 * half:.1f}" '
                     f'height="{max(to_y(q1) - to_y(q3), 0.5):.1f}" fill="{color}" fill-opacity="0.3" '
                     f'stroke="{color}"/>')
        parts.append(f'<line x1="{cx - half:.1f}" y1="{to_y(med):.1f}" x2="{cx + half:.1f}" '
                     f'y2="{to_y(med):.1f}" stroke="{color}" stroke-width="2"/>')
        for o in v[(v < w_lo) | (v > w_hi)]:
            parts.append(f'<circle cx="{cx:.1f}" cy="{to_y(o):.1f}" r="2" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_plot(x: Sequence[float], series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
              title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Mean lines with +-1 sd error bars; ``series`` maps name to (means, sds)."""
    xs = np.asarray(x, dtype=np.float64)
    stacked = [np.asarray(m, float) + s * np.asarray(sd, float)
               for m, sd in series.values() for s in (-1, 1)]
    lo, hi = _y_range(np.concatenate(stacked) if stacked else np.zeros(0))
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    x_lo, x_hi = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    to_x = lambda v: left + (v - x_lo) / (x_hi - x_lo) * (right - left - 20) + 10  # noqa: E731
    to_y = lambda v: bottom - (v - lo) / (hi - lo) * (bottom - top)  # noqa: E731
    parts = _frame(title, xlabel, ylabel) + _y_axis(lo, hi, to_y)
    parts.append(f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>')
    for v in xs:
        parts.append(f'<text x="{to_x(v):.1f}" y="{bottom + 18}" text-anchor="middle">{v:g}</text>')
    for k, (name, (means, sds)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        m = np.asarray(means, float)
        sd = np.asarray(sds, float)
        pts = " ".join(f"{to_x(a):.1f},{to_y(b):.1f}" for a, b in zip(xs, m))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b, e in zip(xs, m, sd):
            parts.append(f'<line x1="{to_x(a):.1f}" y1="{to_y(b - e):.1f}" x2="{to_x(a):.1f}" '
                         f'y2="{to_y(b + e):.1f}" stroke="{color}"/>')
            parts.append(f'<circle cx="{to_x(a):.1f}" cy="{to_y(b):.1f}" r="3" fill="{color}"/>')
        ly = top + 16 * k
        parts.append(f'<rect x="{right - 90}" y="{ly}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{right - 75}" y="{ly + 9}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
