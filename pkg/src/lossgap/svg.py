"""Minimal self-contained SVG line charts.

Output depends only on the input data: coordinates are printed with fixed
precision and nothing time- or environment-dependent is embedded, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 40, 60
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _nice_step(span: float, target: int = 5) -> float:
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= m * mag:
            return m * mag
    return 10.0 * mag


def _linear_ticks(lo: float, hi: float) -> list[float]:
    step = _nice_step(hi - lo)
    start = math.ceil(lo / step - 1e-9)
    ticks = []
    k = start
    while k * step <= hi + 1e-9 * step:
        ticks.append(k * step)
        k += 1
    return ticks


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:.6g}"


def line_chart(
    series: Mapping[str, Sequence[tuple[float, float]]],
    *,
    x_label: str = "x",
    y_label: str = "y",
    title: str = "",
    logx: bool = False,
) -> str:
    """Render ``{name: [(x, y), ...]}`` as an SVG document string."""
    points = {
        name: sorted((float(x), float(y)) for x, y in pts if math.isfinite(x) and math.isfinite(y))
        for name, pts in series.items()
    }
    xs = [x for pts in points.values() for x, _ in pts]
    ys = [y for pts in points.values() for _, y in pts]
    if not xs:
        raise ValueError("nothing to plot: no finite points")
    if logx and min(xs) <= 0:
        raise ValueError("log-x axis needs positive x values")

    fx = math.log10 if logx else (lambda v: v)
    x_lo, x_hi = fx(min(xs)), fx(max(xs))
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM

    def px(x: float) -> float:
        return LEFT + (fx(x) - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return TOP + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="{TOP - 14}" text-anchor="middle" font-size="14">{escape(title)}</text>')

    if logx:
        x_ticks = [10.0**k for k in range(math.ceil(x_lo - 1e-9), math.floor(x_hi + 1e-9) + 1)]
    else:
        x_ticks = _linear_ticks(x_lo, x_hi)
    for t in x_ticks:
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{TOP + plot_h}" x2="{X:.2f}" y2="{TOP + plot_h + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{TOP + plot_h + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    for t in _linear_ticks(y_lo, y_hi):
        Y = py(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{Y:.2f}" x2="{LEFT}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<line x1="{LEFT}" y1="{Y:.2f}" x2="{LEFT + plot_w}" y2="{Y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{LEFT - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt_tick(t)}</text>')
    if y_lo < 0 < y_hi:
        out.append(f'<line x1="{LEFT}" y1="{py(0):.2f}" x2="{LEFT + plot_w}" y2="{py(0):.2f}" stroke="#888888" stroke-dasharray="4 3"/>')

    out.append(f'<text x="{LEFT + plot_w / 2:.2f}" y="{HEIGHT - 18}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(
        f'<text x="18" y="{TOP + plot_h / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {TOP + plot_h / 2:.2f})">{escape(y_label)}</text>'
    )

    for i, (name, pts) in enumerate(points.items()):
        color = PALETTE[i % len(PALETTE)]
        if pts:
            path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        ly = TOP + 12 + 18 * i
        lx = LEFT + plot_w + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}">{escape(name)}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"
