"""Standalone SVG 1.1 figures for ROC, PR, CMC and IET curves.

Output is a pure function of the plot spec and curve data: element order
follows the input order and every coordinate is printed with two decimals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .errors import EmptySeries, NonPositiveXOnLogScale
from .formats import read_curve_csv
from .types import Curve

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

MARGIN = dict(left=72, right=24, top=44, bottom=56)
LOG_DEFAULT_KINDS = ("ROC", "IET")


@dataclass
class PlotSpec:
    """What to draw.

    ``series`` is a list of ``(label, curve)`` where ``curve`` is a
    :class:`Curve` or a path to a curve CSV. ``x_scale`` is ``linear``,
    ``log10`` or None to pick by curve kind (log10 for ROC and IET when
    every x is positive, linear otherwise).
    ``y_range`` is ``(lo, hi)`` within [0, 1] or None for automatic.
    """

    title: str = ""
    series: Sequence = field(default_factory=list)
    x_scale: Optional[str] = None
    y_range: Optional[tuple] = None
    width_px: int = 640
    height_px: int = 480


def _fmt(v):
    return f"{v:.2f}"


def _load(series):
    out = []
    for label, c in series:
        if not isinstance(c, Curve):
            c = read_curve_csv(c)
        out.append((str(label), c))
    return out


def _x_limits(curves, kind, log):
    xs = np.concatenate([c.x for c in curves])
    if kind == "CMC":
        return 1.0, max(2.0, float(xs.max()))
    if log:
        lo = 10.0 ** math.floor(math.log10(float(xs.min())))
        return min(lo, 0.1), 1.0
    return 0.0, 1.0


def _y_limits(curves, y_range):
    if y_range is not None:
        lo, hi = map(float, y_range)
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError("y_range must satisfy 0 <= lo < hi <= 1")
        return lo, hi
    ys = np.concatenate([c.y for c in curves])
    lo = math.floor(float(ys.min()) * 10.0) / 10.0
    hi = math.ceil(float(ys.max()) * 10.0) / 10.0
    if hi <= lo:
        lo, hi = max(0.0, lo - 0.1), min(1.0, hi + 0.1)
    return lo, hi


def _x_ticks(kind, log, x0, x1):
    if log:
        return [10.0 ** e for e in range(round(math.log10(x0)), round(math.log10(x1)) + 1)]
    if kind == "CMC":
        step = max(1, math.ceil((x1 - x0) / 10))
        return [float(k) for k in range(int(x0), int(x1) + 1, step)]
    return [k / 5 for k in range(6)]


def _tick_label(v, log, kind):
    if log:
        return f"1e{round(math.log10(v))}" if v < 1 else "1"
    if kind == "CMC":
        return str(int(v))
    return f"{v:.1f}"


def render_svg(spec: PlotSpec) -> str:
    """Render ``spec`` to SVG document text."""
    series = _load(spec.series)
    if not series:
        raise EmptySeries("plot needs at least one series")
    curves = [c for _, c in series]
    kind = curves[0].kind
    scale = spec.x_scale
    if scale is None:
        # log10 by default for ROC/IET, unless some x is 0 (e.g. the FAR=0 sentinel point)
        positive = all(np.all(c.x > 0) for c in curves)
        scale = "log10" if kind in LOG_DEFAULT_KINDS and positive else "linear"
    if scale not in ("linear", "log10"):
        raise ValueError("x_scale must be 'linear' or 'log10'")
    log = scale == "log10"
    if log:
        for label, c in series:
            if np.any(c.x <= 0):
                raise NonPositiveXOnLogScale(
                    f"series {label!r} has x <= 0, which a log10 axis cannot show")

    w, h = int(spec.width_px), int(spec.height_px)
    if w <= MARGIN["left"] + MARGIN["right"] or h <= MARGIN["top"] + MARGIN["bottom"]:
        raise ValueError("figure too small for its margins")
    left, top = MARGIN["left"], MARGIN["top"]
    pw = w - MARGIN["left"] - MARGIN["right"]
    ph = h - MARGIN["top"] - MARGIN["bottom"]
    x0, x1 = _x_limits(curves, kind, log)
    y0, y1 = _y_limits(curves, spec.y_range)
    tx = (lambda v: math.log10(v)) if log else (lambda v: v)
    lx0, lx1 = tx(x0), tx(x1)

    def px(x):
        return left + (tx(x) - lx0) / (lx1 - lx0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>',
        f'<text class="title" x="{_fmt(w / 2)}" y="24" text-anchor="middle" '
        f'font-size="15">{escape(spec.title)}</text>',
        f'<rect class="frame" x="{left}" y="{top}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#000000"/>',
    ]
    out.append('<g class="xticks">')
    for v in _x_ticks(kind, log, x0, x1):
        if not (x0 <= v <= x1):
            continue
        x = _fmt(px(v))
        out.append(f'<line x1="{x}" y1="{top}" x2="{x}" y2="{top + ph}" stroke="#dddddd"/>')
        out.append(f'<text x="{x}" y="{top + ph + 16}" text-anchor="middle">'
                   f'{_tick_label(v, log, kind)}</text>')
    out.append('</g>')
    out.append('<g class="yticks">')
    n_y = 5
    for k in range(n_y + 1):
        v = y0 + (y1 - y0) * k / n_y
        y = _fmt(py(v))
        out.append(f'<line x1="{left}" y1="{y}" x2="{left + pw}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y}" text-anchor="end" '
                   f'dominant-baseline="middle">{v:.2f}</text>')
    out.append('</g>')
    x_label = curves[0].x_axis + (" (log scale)" if log else "")
    out.append(f'<text class="xlabel" x="{_fmt(left + pw / 2)}" y="{h - 14}" '
               f'text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text class="ylabel" x="18" y="{_fmt(top + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 18 {_fmt(top + ph / 2)})">{escape(curves[0].y_axis)}</text>')

    clipped = 0
    for n, (label, c) in enumerate(series):
        color = PALETTE[n % len(PALETTE)]
        coords = []
        for x, y in zip(c.x.tolist(), c.y.tolist()):
            if not (x0 <= x <= x1 and y0 <= y <= y1):
                clipped += 1
            cx = min(max(x, x0), x1)
            cy = min(max(y, y0), y1)
            coords.append(f"{_fmt(px(cx))},{_fmt(py(cy))}")
        out.append(f'<polyline class="series" data-label={quoteattr(label)} fill="none" '
                   f'stroke="{color}" stroke-width="1.5" points="{" ".join(coords)}"/>')

    out.append('<g class="legend">')
    lx, ly = left + pw - 160, top + ph - 14 - 16 * (len(series) - 1)
    for n, (label, _) in enumerate(series):
        y = ly + 16 * n
        color = PALETTE[n % len(PALETTE)]
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 20}" y2="{y}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{y}" dominant-baseline="middle">{escape(label)}</text>')
    out.append('</g>')
    if clipped:
        out.append(f'<text class="warning" x="{left + 6}" y="{top + 14}" fill="#b00000">'
                   f'{clipped} point(s) outside the axis range were clipped</text>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def write_svg(spec: PlotSpec, path) -> str:
    text = render_svg(spec)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return text
