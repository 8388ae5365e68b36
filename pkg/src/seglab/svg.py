"""Minimal SVG writers: line plots for 1D fields, heatmaps for 2D fields."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

# a few viridis anchors, linearly interpolated
_CMAP = np.array([
    [68, 1, 84], [72, 40, 120], [62, 74, 137], [49, 104, 142], [38, 130, 142],
    [31, 158, 137], [53, 183, 121], [109, 205, 89], [180, 222, 44], [253, 231, 37],
], dtype=float)
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
MAX_CELLS = 128
MAX_DOTS = 2000
W, H, PAD = 640, 400, 50


def color(t: float) -> str:
    t = min(max(float(t), 0.0), 1.0) * (len(_CMAP) - 1)
    k = min(int(t), len(_CMAP) - 2)
    c = _CMAP[k] + (t - k) * (_CMAP[k + 1] - _CMAP[k])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def _frame(title, xlo, xhi, ylo, yhi, width=W, height=H):
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="20" text-anchor="middle">{escape(title)}</text>',
           f'<line x1="{PAD}" y1="{height - PAD}" x2="{width - PAD}" y2="{height - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{height - PAD}" stroke="black"/>',
           f'<text x="{PAD}" y="{height - PAD + 16}" text-anchor="middle">{_fmt(xlo)}</text>',
           f'<text x="{width - PAD}" y="{height - PAD + 16}" text-anchor="middle">{_fmt(xhi)}</text>',
           f'<text x="{PAD - 6}" y="{height - PAD}" text-anchor="end">{_fmt(ylo)}</text>',
           f'<text x="{PAD - 6}" y="{PAD + 4}" text-anchor="end">{_fmt(yhi)}</text>']
    return out


def line_plot(path, x, series: dict, title: str = "", dots=None) -> None:
    """Polylines of ``series`` (name -> values over ``x``); ``dots`` are x positions marked on the axis."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    ylo = min(float(np.min(y)) for y in ys)
    yhi = max(float(np.max(y)) for y in ys)
    if yhi == ylo:
        yhi = ylo + 1.0
    xlo, xhi = float(x[0]), float(x[-1])

    def sx(v):
        return PAD + (v - xlo) / (xhi - xlo) * (W - 2 * PAD)

    def sy(v):
        return H - PAD - (v - ylo) / (yhi - ylo) * (H - 2 * PAD)

    out = _frame(title, xlo, xhi, ylo, yhi)
    stride = max(1, len(x) // 1000)
    for k, (name, y) in enumerate(zip(series, ys)):
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x[::stride], y[::stride]))
        col = _COLORS[k % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - PAD + 4}" y="{PAD + 16 * k}" fill="{col}">{escape(str(name))}</text>')
    if dots is not None:
        dots = np.asarray(dots, dtype=float).ravel()
        for v in dots[:: max(1, len(dots) // MAX_DOTS)]:
            out.append(f'<circle cx="{sx(v):.1f}" cy="{H - PAD:.1f}" r="2" fill="black"/>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def heatmap(path, grid, values: np.ndarray, title: str = "", dots=None) -> None:
    """Cell-sampled heatmap of a closed-grid 2D array with a colorbar; ``dots`` are (k, 2) points."""
    values = np.asarray(values, dtype=float)
    (x0, x1), (y0, y1) = grid.extent
    sx_n = max(1, int(np.ceil(values.shape[0] / MAX_CELLS)))
    sy_n = max(1, int(np.ceil(values.shape[1] / MAX_CELLS)))
    v = values[::sx_n, ::sy_n]
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    side = H - 2 * PAD
    width = side + 2 * PAD + 80
    out = _frame(title, x0, x1, y0, y1, width=width)
    cw, ch = side / v.shape[0], side / v.shape[1]
    for i in range(v.shape[0]):
        for j in range(v.shape[1]):
            out.append(f'<rect x="{PAD + i * cw:.2f}" y="{H - PAD - (j + 1) * ch:.2f}" '
                       f'width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" '
                       f'fill="{color((v[i, j] - lo) / span)}"/>')
    if dots is not None and len(dots):
        dots = np.asarray(dots, dtype=float)
        for px, py in dots[:: max(1, len(dots) // MAX_DOTS)]:
            cx = PAD + (px - x0) / (x1 - x0) * side
            cy = H - PAD - (py - y0) / (y1 - y0) * side
            out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="1.2" fill="black"/>')
    bx = PAD + side + 30
    for k in range(20):
        out.append(f'<rect x="{bx}" y="{H - PAD - (k + 1) * side / 20:.1f}" width="16" '
                   f'height="{side / 20 + 0.5:.1f}" fill="{color(k / 19)}"/>')
    out.append(f'<text x="{bx + 20}" y="{H - PAD}">{_fmt(lo)}</text>')
    out.append(f'<text x="{bx + 20}" y="{PAD + 4}">{_fmt(hi)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
