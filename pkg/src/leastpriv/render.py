"""Static SVG figures: the delta_adv heatmap and the frontier scatter.

Output is built as plain text with fixed-precision coordinates, so equal
inputs give byte-identical files. No fonts, images or stylesheets are
referenced from outside the document.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import LeakageError
from .measures import AlphaOrder

NEUTRAL = (255, 255, 255)
HOT = (178, 24, 43)  # positive: more leakage
COLD = (33, 102, 172)
MISSING = (200, 200, 200)


@dataclass(frozen=True)
class HeatmapSpec:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray
    title: str = "delta_adv (bits)"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.rows), len(self.cols)):
            raise LeakageError(f"grid {v.shape} does not match {len(self.rows)} x {len(self.cols)} labels")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "cols", tuple(self.cols))

    @classmethod
    def from_matrix(cls, matrix, attr: str = "delta_adv") -> "HeatmapSpec":
        return cls(matrix.tasks, matrix.sensitives, matrix.values(attr), f"{attr} (bits)")

    @property
    def scale(self) -> float:
        """Half-width of the symmetric color scale around 0."""
        v = self.values[np.isfinite(self.values)]
        top = float(np.abs(v).max()) if v.size else 0.0
        return top if top > 0 else 1.0


def color_position(value: float, scale: float) -> float:
    """Position of ``value`` on the scale, in [-1, 1] (0 is neutral)."""
    return max(-1.0, min(1.0, value / scale))


def diverging_rgb(value: float, scale: float) -> tuple[int, int, int]:
    if not math.isfinite(value):
        return MISSING
    t = color_position(value, scale)
    end = HOT if t > 0 else COLD
    a = abs(t)
    return tuple(int(round(n + (e - n) * a)) for n, e in zip(NEUTRAL, end))


def _hex(rgb) -> str:
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _f(x: float) -> str:
    return f"{x:.2f}"


def _text(x, y, s, size=12, anchor="middle", extra="") -> str:
    return (f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}"{extra}>{escape(s)}</text>')


def _cell_label(v: float) -> str:
    if not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def render_heatmap_svg(spec: HeatmapSpec, cell: int = 64) -> bytes:
    """Diverging heatmap anchored at 0, red for positive, with a legend."""
    n_r, n_c = spec.values.shape
    left = 20 + 8 * max([len(r) for r in spec.rows] + [4])
    top = 60
    grid_w, grid_h = n_c * cell, n_r * cell
    legend_h = 70
    width = left + grid_w + 20
    height = top + grid_h + legend_h
    width = max(width, left + 260)
    scale = spec.scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        _text(width / 2, 20, spec.title, 14),
    ]
    for j, c in enumerate(spec.cols):
        out.append(_text(left + (j + 0.5) * cell, top - 10, c))
    for i, r in enumerate(spec.rows):
        out.append(_text(left - 8, top + (i + 0.5) * cell + 4, r, anchor="end"))
        for j in range(n_c):
            v = float(spec.values[i, j])
            rgb = diverging_rgb(v, scale)
            x, y = left + j * cell, top + i * cell
            out.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{cell}" height="{cell}" '
                       f'fill="{_hex(rgb)}" stroke="#333333" stroke-width="1"/>')
            # dark cells get light text
            ink = "#ffffff" if sum(rgb) < 382 else "#000000"
            out.append(_text(x + cell / 2, y + cell / 2 + 4, _cell_label(v), 11, extra=f' fill="{ink}"'))

    # legend: stepped bar from -scale to +scale
    steps = 21
    bar_w, bar_h = 240, 14
    lx, ly = left, top + grid_h + 20
    for k in range(steps):
        v = -scale + 2 * scale * k / (steps - 1)
        out.append(f'<rect x="{_f(lx + k * bar_w / steps)}" y="{_f(ly)}" width="{_f(bar_w / steps)}" '
                   f'height="{bar_h}" fill="{_hex(diverging_rgb(v, scale))}"/>')
    out.append(f'<rect x="{_f(lx)}" y="{_f(ly)}" width="{bar_w}" height="{bar_h}" fill="none" '
               f'stroke="#333333" stroke-width="1"/>')
    for v, x in ((-scale, lx), (0.0, lx + bar_w / 2), (scale, lx + bar_w)):
        out.append(_text(x, ly + bar_h + 14, _cell_label(v), 10))
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


# frontier scatter ----------------------------------------------------------------

PROVENANCE_FILL = {"enumerated": "#d62728", "searched": "#1f77b4"}


def render_frontier_svg(points: Sequence, utility_key: AlphaOrder = AlphaOrder.INFINITY,
                        size: int = 420, title: str = "utility vs conditional leakage") -> bytes:
    """Scatter of (gamma_lpp, utility) with the y = x diagonal."""
    pts = [(p.gamma_lpp, p.utility(utility_key), p.provenance.value) for p in points]
    finite = [max(g, u) for g, u, _ in pts if math.isfinite(g) and math.isfinite(u)]
    span = max(finite + [1.0]) * 1.05
    pad = 50
    plot = size - 2 * pad

    def sx(v):
        return pad + plot * v / span

    def sy(v):
        return size - pad - plot * v / span

    ylabel = "I_1(Y;Z)" if utility_key is AlphaOrder.ONE else "I_inf(Y;Z)"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>',
        _text(size / 2, 22, title, 14),
        # axes
        f'<line x1="{_f(sx(0))}" y1="{_f(sy(0))}" x2="{_f(sx(span))}" y2="{_f(sy(0))}" stroke="#000000"/>',
        f'<line x1="{_f(sx(0))}" y1="{_f(sy(0))}" x2="{_f(sx(0))}" y2="{_f(sy(span))}" stroke="#000000"/>',
        # y = x
        f'<line class="diagonal" x1="{_f(sx(0))}" y1="{_f(sy(0))}" x2="{_f(sx(span))}" y2="{_f(sy(span))}" '
        f'stroke="#888888" stroke-dasharray="6,4"/>',
        _text(size / 2, size - 12, "gamma_lpp (bits)"),
        _text(16, size / 2, ylabel, extra=f' transform="rotate(-90 16 {_f(size / 2)})"'),
    ]
    for k in range(5):
        v = span * k / 4
        out.append(_text(sx(v), sy(0) + 16, f"{v:.2f}", 10))
        out.append(_text(sx(0) - 6, sy(v) + 4, f"{v:.2f}", 10, anchor="end"))
    for g, u, prov in pts:
        if not (math.isfinite(g) and math.isfinite(u)):
            continue
        out.append(f'<circle cx="{_f(sx(g))}" cy="{_f(sy(u))}" r="3" '
                   f'fill="{PROVENANCE_FILL.get(prov, "#000000")}" fill-opacity="0.6"/>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
