"""Minimal deterministic SVG line plots for sweep and accuracy reports.

Hand-rolled rather than a plotting library so repeated runs produce
byte-identical files (no embedded timestamps, ids, or font metrics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


@dataclass
class Panel:
    """One axes box: named (x, y) series sharing a scale."""

    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)  # (label, xs, ys)

    def add(self, label, xs, ys):
        self.series.append((label, list(xs), list(ys)))
        return self


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _panel_svg(panel: Panel, x0: float, y0: float, w: float, h: float) -> str:
    pad_l, pad_r, pad_t, pad_b = 46.0, 10.0, 22.0, 34.0
    ax_x, ax_y = x0 + pad_l, y0 + pad_t
    ax_w, ax_h = w - pad_l - pad_r, h - pad_t - pad_b

    xs_all = [x for _, xs, _ in panel.series for x in xs]
    ys_all = [y for _, _, ys in panel.series for y in ys if math.isfinite(y)]
    x_lo, x_hi = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y_lo, y_hi = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
    if y_lo > 0:
        y_lo = 0.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    y_hi += (y_hi - y_lo) * 0.05

    def px(x):
        return ax_x + (x - x_lo) / (x_hi - x_lo) * ax_w

    def py(y):
        return ax_y + ax_h - (y - y_lo) / (y_hi - y_lo) * ax_h

    out = []
    out.append(f'<rect x="{ax_x:.2f}" y="{ax_y:.2f}" width="{ax_w:.2f}" '
               f'height="{ax_h:.2f}" fill="none" stroke="#444"/>')
    out.append(f'<text x="{x0 + w / 2:.2f}" y="{y0 + 14:.2f}" text-anchor="middle" '
               f'font-size="12" font-family="sans-serif">{panel.title}</text>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(t):.2f}" y1="{ax_y + ax_h:.2f}" '
                   f'x2="{px(t):.2f}" y2="{ax_y + ax_h + 4:.2f}" stroke="#444"/>')
        out.append(f'<text x="{px(t):.2f}" y="{ax_y + ax_h + 15:.2f}" '
                   f'text-anchor="middle" font-size="9" '
                   f'font-family="sans-serif">{t:g}</text>')
    for t in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{ax_x - 4:.2f}" y1="{py(t):.2f}" '
                   f'x2="{ax_x:.2f}" y2="{py(t):.2f}" stroke="#444"/>')
        out.append(f'<text x="{ax_x - 6:.2f}" y="{py(t) + 3:.2f}" '
                   f'text-anchor="end" font-size="9" '
                   f'font-family="sans-serif">{t:g}</text>')
    out.append(f'<text x="{ax_x + ax_w / 2:.2f}" y="{y0 + h - 4:.2f}" '
               f'text-anchor="middle" font-size="10" '
               f'font-family="sans-serif">{panel.xlabel}</text>')
    out.append(f'<text x="{x0 + 12:.2f}" y="{ax_y + ax_h / 2:.2f}" '
               f'text-anchor="middle" font-size="10" font-family="sans-serif" '
               f'transform="rotate(-90 {x0 + 12:.2f} {ax_y + ax_h / 2:.2f})">'
               f'{panel.ylabel}</text>')

    for idx, (label, xs, ys) in enumerate(panel.series):
        color = _COLORS[idx % len(_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys)
                       if math.isfinite(y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        if label:
            lx = ax_x + ax_w - 8
            ly = ax_y + 12 + idx * 12
            out.append(f'<line x1="{lx - 26:.2f}" y1="{ly - 3:.2f}" '
                       f'x2="{lx - 12:.2f}" y2="{ly - 3:.2f}" stroke="{color}" '
                       f'stroke-width="1.5"/>')
            out.append(f'<text x="{lx - 8:.2f}" y="{ly:.2f}" text-anchor="start" '
                       f'font-size="9" font-family="sans-serif">{label}</text>')
    return "\n".join(out)


def render_svg(panels, *, columns: int = 3, panel_width: float = 300.0,
               panel_height: float = 220.0) -> str:
    """Lay panels out on a grid and return the complete SVG document."""
    panels = list(panels)
    columns = min(columns, max(1, len(panels)))
    rows = (len(panels) + columns - 1) // columns
    width = columns * panel_width
    height = rows * panel_height
    body = []
    for i, panel in enumerate(panels):
        x0 = (i % columns) * panel_width
        y0 = (i // columns) * panel_height
        body.append(_panel_svg(panel, x0, y0, panel_width, panel_height))
    return ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
            f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">\n'
            '<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def write_svg(path, panels, **kwargs) -> None:
    with open(path, "w") as f:
        f.write(render_svg(panels, **kwargs))
