"""Minimal self-contained SVG line plots."""

from pathlib import Path

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(x):
    return f"{x:.4g}"


def line_plot(path, x, series, title="", xlabel="", ylabel="", width=720, height=420):
    """Write ``series`` (``{label: y}``) against ``x`` as an SVG file."""
    x = np.asarray(x, dtype=float)
    margin_l, margin_r, margin_t, margin_b = 70, 150, 40, 50
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.zeros(1)
    if finite.size == 0:
        finite = np.zeros(1)
    x0, x1 = float(np.min(x)), float(np.max(x))
    y0, y1 = float(np.min(finite)), float(np.max(finite))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0

    def sx(v):
        return margin_l + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return margin_t + (y1 - v) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{margin_l + pw / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{margin_t + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 15 {margin_t + ph / 2})">{ylabel}</text>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        parts.append(f'<text x="{sx(xv):.1f}" y="{margin_t + ph + 16}" text-anchor="middle">{_fmt(xv)}</text>')
        parts.append(f'<text x="{margin_l - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{_fmt(yv)}</text>')
    for i, (label, y) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        y = np.asarray(y, dtype=float)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y) if np.isfinite(b))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = margin_t + 14 + 16 * i
        parts.append(f'<line x1="{margin_l + pw + 10}" y1="{ly - 4}" x2="{margin_l + pw + 30}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{margin_l + pw + 35}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
