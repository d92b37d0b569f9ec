"""Minimal SVG output for the spectral-region figures.

The complex plane is drawn with the real part horizontal. Regions are
closed ``<path>`` elements, boundary curves ``<polyline>`` elements; every
document declares a ``viewBox``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .config import FigureSpec
from .errors import DegenerateRegionError
from .regions import (
    SpectralParams,
    envelope_slope,
    l1_contained_parabola,
    l1_containing_parabola,
    lp_contained_region,
    lp_containing_parabola,
)

PALETTE = {"contained": "#4f81bd", "containing": "#c0504d", "slice": "#333333", "envelope": "#9bbb59"}


@dataclass
class SvgCanvas:
    xrange: tuple[float, float]
    yrange: tuple[float, float]
    width: int = 480
    height: int = 480
    elements: list[str] = field(default_factory=list)

    def to_px(self, x, y):
        (x0, x1), (y0, y1) = self.xrange, self.yrange
        px = (np.asarray(x) - x0) / (x1 - x0) * self.width
        py = self.height - (np.asarray(y) - y0) / (y1 - y0) * self.height
        return px, py

    def _coords(self, xs, ys) -> list[str]:
        px, py = self.to_px(xs, ys)
        return [f"{a:.3f},{b:.3f}" for a, b in zip(np.atleast_1d(px), np.atleast_1d(py))]

    def region(self, xs, ys, fill: str, opacity: float = 0.35, label: str = "") -> None:
        pts = self._coords(xs, ys)
        d = "M " + " L ".join(pts) + " Z"
        self.elements.append(f'<path class="{escape(label)}" d="{d}" fill="{fill}" '
                             f'fill-opacity="{opacity}" stroke="none"/>')

    def polyline(self, xs, ys, stroke: str, width: float = 1.2, label: str = "", dash: str = "") -> None:
        pts = " ".join(self._coords(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.elements.append(f'<polyline class="{escape(label)}" points="{pts}" fill="none" '
                             f'stroke="{stroke}" stroke-width="{width}"{extra}/>')

    def text(self, x: float, y: float, s: str, size: int = 12) -> None:
        px, py = self.to_px(x, y)
        self.elements.append(f'<text x="{float(px):.1f}" y="{float(py):.1f}" font-size="{size}" '
                             f'font-family="sans-serif">{escape(s)}</text>')

    def axes(self) -> None:
        (x0, x1), (y0, y1) = self.xrange, self.yrange
        if x0 <= 0 <= x1:
            self.polyline([0, 0], [y0, y1], "#888888", 0.8, "axis")
        if y0 <= 0 <= y1:
            self.polyline([x0, x1], [0, 0], "#888888", 0.8, "axis")

    def to_string(self, title: str = "") -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        body = [head]
        if title:
            body.append(f"<title>{escape(title)}</title>")
        body.append(f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>')
        body.extend(self.elements)
        body.append("</svg>")
        return "\n".join(body) + "\n"


def _default_ranges(params: SpectralParams, spec: FigureSpec):
    n, a0, a1 = params.n, params.alpha0, params.alpha1
    scale = max(1.0, n * n * a1 * a1 / 2)
    lo = min(0.0, -n * n * (a1 * a1 - a0 * a0) / 4)
    xr = spec.xrange or (lo - 0.2 * scale, scale * 1.5)
    ymax = math.sqrt(n * n * a1 * a1 * (xr[1] - lo)) if a1 > 0 else 1.0
    yr = spec.yrange or (-ymax, ymax)
    return tuple(xr), tuple(yr)


def _shade(canvas: SvgCanvas, boundary, color: str, label: str, m: int) -> None:
    """Shade ``x >= boundary(y)`` within the canvas window."""
    (x0, x1), (y0, y1) = canvas.xrange, canvas.yrange
    ys = np.linspace(y0, y1, m)
    bx = np.clip(boundary(ys), x0, x1)
    xs = np.concatenate([bx, [x1, x1]])
    yy = np.concatenate([ys, [y1, y0]])
    canvas.region(xs, yy, color, label=label)
    inside = boundary(ys) <= x1
    canvas.polyline(bx[inside], ys[inside], color, 1.5, label + "-boundary")


def _slice_curves(canvas: SvgCanvas, params: SpectralParams, p: float, m: int, per_interval: int = 7):
    region = lp_contained_region(params, p)
    (x0, x1), (y0, y1) = canvas.xrange, canvas.yrange
    ys = np.linspace(y0, y1, m)
    for A, sl in region.slices(per_interval):
        if sl.degenerate:
            canvas.polyline([max(sl.vertex, x0), x1], [0, 0], PALETTE["slice"], 2.0, f"slice A={A:g}")
            continue
        bx = sl.boundary_x(ys)
        ok = bx <= x1
        canvas.polyline(bx[ok], ys[ok], PALETTE["slice"], 0.7, f"slice A={A:g}")


def build_figure(spec: FigureSpec, params: SpectralParams, p: float | None = None) -> str:
    """SVG text for one figure kind."""
    p = params.p if p is None else p
    xr, yr = _default_ranges(params, spec)
    canvas = SvgCanvas(xr, yr)
    canvas.axes()
    m = spec.resolution
    kind = spec.kind
    if kind in ("l1-region", "l1-both"):
        if kind == "l1-both":
            outer = l1_containing_parabola(params)
            _shade(canvas, outer.boundary_x, PALETTE["containing"], "containing", m)
        inner = l1_contained_parabola(params)
        _shade(canvas, inner.boundary_x, PALETTE["contained"], "contained", m)
        title = f"L1 spectral region, n={params.n}, alpha0={params.alpha0:g}, alpha1={params.alpha1:g}"
    elif kind == "lp-both":
        outer = lp_containing_parabola(params, p)
        if outer.degenerate:
            canvas.polyline([outer.vertex, xr[1]], [0, 0], PALETTE["containing"], 3.0, "containing")
        else:
            _shade(canvas, outer.boundary_x, PALETTE["containing"], "containing", m)
        region = lp_contained_region(params, p)
        if region.degenerate:
            _slice_curves(canvas, params, p, m)
        else:
            _shade(canvas, region.min_boundary, PALETTE["contained"], "contained", m)
        title = f"Lp spectral regions, p={p:g}"
    else:
        region = lp_contained_region(params, p)
        if not region.degenerate:
            _shade(canvas, region.min_boundary, PALETTE["contained"], "contained", m)
        _slice_curves(canvas, params, p, m)
        title = f"Lp slice family, p={p:g}"
        if kind == "envelope":
            try:
                slope = envelope_slope(p)
            except DegenerateRegionError:
                slope = None
            if slope is not None:
                ys = np.array(yr)
                for sgn in (1, -1):
                    canvas.polyline(sgn * slope * ys, ys, PALETTE["envelope"], 1.2,
                                    f"envelope {'+' if sgn > 0 else '-'}", dash="6,4")
                title += f", envelope x = +-{slope:.6g} y"
    canvas.text(xr[0] + 0.02 * (xr[1] - xr[0]), yr[1] - 0.05 * (yr[1] - yr[0]), title)
    return canvas.to_string(title)
