"""Minimal static SVG line plots: polylines, axes, dashed overlays and vertical markers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 30, 50
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False
    color: str | None = None


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def line_plot(
    series: list[Series],
    title: str = "",
    xlabel: str = "t",
    ylabel: str = "",
    log_x: bool = False,
    markers: dict[str, float] | None = None,
) -> str:
    """Render ``series`` into an SVG document string.

    Dashed series are drawn in black unless a colour is given.  ``markers``
    maps a label (e.g. "tau1") to an x position drawn as a dashed vertical line.
    With ``log_x`` nonpositive x values are dropped.
    """
    markers = markers or {}
    prepared = []
    for s in series:
        x, y = np.asarray(s.x, float), np.asarray(s.y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_x:
            keep &= x > 0
        prepared.append((s, x[keep], y[keep]))
    xs = np.concatenate([p[1] for p in prepared] or [np.array([0.0, 1.0])])
    ys = np.concatenate([p[2] for p in prepared] or [np.array([0.0, 1.0])])
    if xs.size == 0:
        xs, ys = np.array([1.0, 10.0]), np.array([0.0, 1.0])

    tx = np.log10 if log_x else (lambda v: np.asarray(v, float))
    x0, x1 = float(tx(xs.min())), float(tx(xs.max()))
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B

    def px(v):
        return MARGIN_L + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN_T + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')

    # ticks
    if log_x:
        xticks = [10.0**k for k in range(math.ceil(x0), math.floor(x1) + 1)]
    else:
        xticks = list(np.linspace(x0, x1, 5))
    for v in xticks:
        xp = px(v)
        out.append(f'<line x1="{xp:.1f}" y1="{MARGIN_T + ph}" x2="{xp:.1f}" y2="{MARGIN_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{xp:.1f}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{_fmt(v)}</text>')
    for v in np.linspace(y0 + pad, y1 - pad, 5) if y1 - y0 > 2 * pad else [y0, y1]:
        yp = py(v)
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{yp:.1f}" x2="{MARGIN_L}" y2="{yp:.1f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{yp + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
    out.append(
        f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">'
        f"{escape(xlabel)}{' (log scale)' if log_x else ''}</text>"
    )
    if ylabel:
        out.append(
            f'<text x="16" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.1f})">{escape(ylabel)}</text>'
        )

    for name, pos in markers.items():
        if not math.isfinite(pos) or (log_x and pos <= 0) or not x0 <= tx(pos) <= x1:
            continue
        xp = px(pos)
        out.append(
            f'<line x1="{xp:.1f}" y1="{MARGIN_T}" x2="{xp:.1f}" y2="{MARGIN_T + ph}" '
            'stroke="gray" stroke-dasharray="4,4"/>'
        )
        out.append(f'<text x="{xp + 3:.1f}" y="{MARGIN_T + 12}" fill="gray">{escape(name)}</text>')

    colour_index = 0
    for k, (s, x, y) in enumerate(prepared):
        if s.color:
            colour = s.color
        elif s.dashed:
            colour = "black"
        else:
            colour = PALETTE[colour_index % len(PALETTE)]
            colour_index += 1
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        if x.size:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5"{dash} points="{pts}"/>')
        ly = MARGIN_T + 14 + 16 * k
        lx = WIDTH - MARGIN_R + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{colour}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{lx + 25}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
