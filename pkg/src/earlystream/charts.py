"""Deterministic, self-contained SVG line charts for the report command.

Hand-rolled on purpose: output bytes depend only on the data handed in,
which keeps re-rendering from an emitted table reproducible.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 44, 54


def _fmt(v: float) -> str:
    return f"{v:g}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


class _Scale:
    def __init__(self, lo, hi, out_lo, out_hi, log=False):
        self.log = log
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi = lo, hi
        self.out_lo, self.out_hi = out_lo, out_hi

    def __call__(self, v: float) -> float:
        v = math.log10(v) if self.log else v
        frac = (v - self.lo) / (self.hi - self.lo)
        return self.out_lo + frac * (self.out_hi - self.out_lo)


def line_chart(
    series: Sequence[tuple[str, Sequence[tuple[float, float]]]],
    title: str,
    x_label: str,
    y_label: str,
    log_x: bool = False,
    x_ticks: Optional[Sequence[float]] = None,
) -> str:
    """Render labeled (x, y) polylines; points with missing y are simply absent."""
    xs = [x for _label, pts in series for x, _y in pts]
    ys = [y for _label, pts in series for _x, y in pts]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.06 * (y_hi - y_lo)
    y_lo = min(y_lo, 0.0) if y_lo >= 0 and y_lo <= pad else y_lo - pad
    y_hi += pad

    sx = _Scale(x_lo, x_hi, MARGIN_L, WIDTH - MARGIN_R, log=log_x)
    sy = _Scale(y_lo, y_hi, HEIGHT - MARGIN_B, MARGIN_T)

    if x_ticks is None:
        x_ticks = sorted(set(xs)) if log_x or len(set(xs)) <= 8 else _nice_ticks(x_lo, x_hi)
    y_ticks = _nice_ticks(y_lo, y_hi)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica,Arial,sans-serif">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:g}" y="24" text-anchor="middle" font-size="15">{title}</text>',
    ]
    plot_b, plot_l = HEIGHT - MARGIN_B, MARGIN_L
    for tv in y_ticks:
        y = sy(tv)
        parts.append(
            f'<line x1="{plot_l}" y1="{y:.2f}" x2="{WIDTH - MARGIN_R}" y2="{y:.2f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{plot_l - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{_fmt(tv)}</text>'
        )
    for tv in x_ticks:
        x = sx(tv)
        parts.append(
            f'<line x1="{x:.2f}" y1="{plot_b}" x2="{x:.2f}" y2="{plot_b + 5}" '
            f'stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{plot_b + 20}" text-anchor="middle" font-size="11">{_fmt(tv)}</text>'
        )
    parts.append(
        f'<line x1="{plot_l}" y1="{plot_b}" x2="{WIDTH - MARGIN_R}" y2="{plot_b}" '
        f'stroke="#333333" stroke-width="1.5"/>'
    )
    parts.append(
        f'<line x1="{plot_l}" y1="{MARGIN_T}" x2="{plot_l}" y2="{plot_b}" '
        f'stroke="#333333" stroke-width="1.5"/>'
    )
    parts.append(
        f'<text x="{(plot_l + WIDTH - MARGIN_R) / 2:g}" y="{HEIGHT - 12}" '
        f'text-anchor="middle" font-size="12">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{(MARGIN_T + plot_b) / 2:g}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {(MARGIN_T + plot_b) / 2:g})">{y_label}</text>'
    )

    for i, (label, pts) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = [(sx(x), sy(y)) for x, y in pts]
        if len(coords) > 1:
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
            parts.append(
                f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        for x, y in coords:
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>')
        ly = MARGIN_T + 16 * i
        lx = WIDTH - MARGIN_R - 150
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{lx + 28}" y="{ly}" font-size="11">{label}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
