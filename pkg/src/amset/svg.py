"""Static SVG line charts for result rows."""
from __future__ import annotations

from collections import defaultdict
from typing import Sequence
from xml.sax.saxutils import escape

from .harness import METHODS, ResultRow

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=60, right=170, top=30, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#7f7f7f")
METRICS = ("fdr", "mfdr", "mdr", "power")


def _x_of(row: ResultRow, x_axis: str) -> float:
    if x_axis == "stage":
        return float(row.stage)
    # scenarios without a sweep leave the value empty; plot them at 0
    return float(row.sweep_value) if row.sweep_value != "" else 0.0


def emit_svg(rows: Sequence[ResultRow], metric: str, x_axis: str = "sweep", alpha: float | None = 0.05,
             title: str | None = None) -> str:
    """One polyline per method; a dashed line at ``alpha`` for fdr/mfdr."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if x_axis not in ("sweep", "stage"):
        raise ValueError("x_axis must be 'sweep' or 'stage'")
    keep = [r for r in rows if r.status == "ok" and (x_axis == "stage") == (r.stage != "final")]
    if not keep:
        raise ValueError("no rows to plot")
    series = defaultdict(list)
    for r in keep:
        series[r.method].append((_x_of(r, x_axis), float(getattr(r, metric))))
    order = [m for m in METHODS if m in series] + sorted(m for m in series if m not in METHODS)

    xs = [x for pts in series.values() for x, _ in pts]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    y0, y1 = 0.0, 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    # axes and ticks
    out.append(f'<line x1="{sx(x0):.2f}" y1="{sy(y0):.2f}" x2="{sx(x1):.2f}" y2="{sy(y0):.2f}" stroke="black"/>')
    out.append(f'<line x1="{sx(x0):.2f}" y1="{sy(y0):.2f}" x2="{sx(x0):.2f}" y2="{sy(y1):.2f}" stroke="black"/>')
    for i in range(6):
        y = y0 + i * (y1 - y0) / 5
        out.append(f'<text x="{sx(x0) - 6:.2f}" y="{sy(y) + 4:.2f}" text-anchor="end">{y:.1f}</text>')
    for x in sorted(set(xs)):
        out.append(f'<text x="{sx(x):.2f}" y="{sy(y0) + 16:.2f}" text-anchor="middle">{x:g}</text>')
    xlabel = "stage" if x_axis == "stage" else (keep[0].sweep_param or "sweep")
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{metric.upper()}</text>')
    if alpha is not None and metric in ("fdr", "mfdr"):
        out.append(f'<line class="alpha" x1="{sx(x0):.2f}" y1="{sy(alpha):.2f}" x2="{sx(x1):.2f}" '
                   f'y2="{sy(alpha):.2f}" stroke="gray" stroke-dasharray="5,4"/>')
    for k, name in enumerate(order):
        color = COLORS[k % len(COLORS)]
        pts = sorted(series[name])
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 14
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{lx + 26}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
