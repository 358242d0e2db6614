"""Minimal SVG writers for heatmaps, tilings and dyadic decompositions."""

from __future__ import annotations

import math

import numpy as np

COLOR_HEX = {"blue": "#3b6fd8", "red": "#d8453b", "green": "#3bab52"}


def _rgb(t: float) -> str:
    """Blue-white-red ramp on [0, 1]."""
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        s = t / 0.5
        r, g, b = 59 + s * (255 - 59), 111 + s * (255 - 111), 216 + s * (255 - 216)
    else:
        s = (t - 0.5) / 0.5
        r, g, b = 255 - s * (255 - 216), 255 - s * (255 - 69), 255 - s * (255 - 59)
    return f"#{int(r):02x}{int(g):02x}{int(b):02x}"


def heatmap(values, title: str = "", cell: int = 6) -> str:
    """Heatmap of a 2-D array; NaN cells are left blank.  Row i is drawn at x = i."""
    v = np.asarray(values, dtype=float)
    finite = v[np.isfinite(v)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    w, h = v.shape[0] * cell, v.shape[1] * cell
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h + 20}" viewBox="0 0 {w} {h + 20}">']
    out.append(f'<text x="2" y="14" font-size="12" font-family="monospace">{title} [{lo:.4g}, {hi:.4g}]</text>')
    for i in range(v.shape[0]):
        for j in range(v.shape[1]):
            if math.isfinite(v[i, j]):
                y = 20 + (v.shape[1] - 1 - j) * cell
                out.append(f'<rect x="{i * cell}" y="{y}" width="{cell}" height="{cell}" fill="{_rgb((v[i, j] - lo) / span)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _screen(p, n, scale):
    # 60-degree picture of the lattice: (x, y) -> x + y/2, y*sqrt(3)/2
    x, y = p
    return (x + y / 2.0) * scale + 10, (n - y) * math.sqrt(3) / 2.0 * scale + 10


def tiling_svg(tiling, hexagon, scale: float = 20.0) -> str:
    n = hexagon.n
    w = (1.5 * n) * scale + 20
    h = n * math.sqrt(3) / 2 * scale + 20
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}">']
    for z in sorted(tiling.lozenges):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (_screen(p, n, scale) for p in z.vertices))
        out.append(f'<polygon points="{pts}" fill="{COLOR_HEX[z.color]}" stroke="#222" stroke-width="0.6"/>')
    for k, which in tiling.border:
        a = (k, n - k)
        b = (k + 1, n - k - 1)
        c = (k + 1, n - k) if which == "up" else (k, n - k - 1)
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in (_screen(p, n, scale) for p in (a, b, c)))
        out.append(f'<polygon points="{pts}" fill="#f2d36b" stroke="#222" stroke-width="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cz_svg(result, size: int = 512) -> str:
    root = result.root
    s = size / root.side
    x0, y0 = root.lower
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    for q, _ in result.good:
        x, y = q.lower
        out.append(f'<rect x="{(x - x0) * s:.3f}" y="{size - (y - y0 + q.side) * s:.3f}" width="{q.side * s:.3f}" height="{q.side * s:.3f}" fill="#cfe8cf" stroke="#333" stroke-width="0.5"/>')
    for q in result.bad:
        x, y = q.lower
        out.append(f'<rect x="{(x - x0) * s:.3f}" y="{size - (y - y0 + q.side) * s:.3f}" width="{q.side * s:.3f}" height="{q.side * s:.3f}" fill="#e06666" stroke="#333" stroke-width="0.3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
