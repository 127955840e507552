"""Minimal SVG heatmap writer for sweep matrices.

No plotting dependency: cells become rect elements, palettes map values
to colors, and output bytes depend only on the inputs, so re-renders of
the same matrix are byte-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CategoricalPalette",
    "ContinuousPalette",
    "bounce_palette",
    "value_palette",
    "render_heatmap",
]


def _hex_rgb(color: str) -> tuple[int, int, int]:
    s = color.lstrip("#")
    return int(s[0:2], 16), int(s[2:4], 16), int(s[4:6], 16)


def _rgb_hex(r: int, g: int, b: int) -> str:
    return f"#{r:02x}{g:02x}{b:02x}"


@dataclass(frozen=True)
class CategoricalPalette:
    """Integer-valued fields: fixed colors per category, a crop threshold
    for large values, white for NaN (the Zeno/invalid marker)."""

    colors: dict
    crop: float | None = None
    over_color: str = "#d9d9d9"
    nan_color: str = "#ffffff"

    def color(self, v: float) -> str:
        if math.isnan(v):
            return self.nan_color
        if self.crop is not None and v > self.crop:
            return self.over_color
        return self.colors.get(int(round(v)), self.over_color)

    def legend(self) -> list[tuple[str, str]]:
        out = [(str(k), self.colors[k]) for k in sorted(self.colors)]
        if self.crop is not None:
            out.append((f"> {int(self.crop)}", self.over_color))
        out.append(("zeno", self.nan_color))
        return out


# Anchor stops of a dark-to-light perceptual ramp.
_RAMP = ("#440154", "#46327e", "#365c8d", "#277f8e", "#1fa187",
         "#4ac16d", "#a0da39", "#fde725")


@dataclass(frozen=True)
class ContinuousPalette:
    """Real-valued fields: linear interpolation through fixed color stops
    between vmin and vmax (data range when not pinned)."""

    stops: tuple = _RAMP
    vmin: float | None = None
    vmax: float | None = None
    nan_color: str = "#ffffff"

    def resolve(self, values: np.ndarray) -> tuple[float, float]:
        finite = values[np.isfinite(values)]
        lo = self.vmin if self.vmin is not None else \
            (float(finite.min()) if finite.size else 0.0)
        hi = self.vmax if self.vmax is not None else \
            (float(finite.max()) if finite.size else 1.0)
        return lo, hi

    def color_at(self, t: float) -> str:
        t = min(max(t, 0.0), 1.0)
        k = t * (len(self.stops) - 1)
        i = min(int(k), len(self.stops) - 2)
        frac = k - i
        r0, g0, b0 = _hex_rgb(self.stops[i])
        r1, g1, b1 = _hex_rgb(self.stops[i + 1])
        return _rgb_hex(round(r0 + (r1 - r0) * frac),
                        round(g0 + (g1 - g0) * frac),
                        round(b0 + (b1 - b0) * frac))

    def color(self, v: float, lo: float, hi: float) -> str:
        if not math.isfinite(v):
            return self.nan_color
        if hi <= lo:
            return self.color_at(0.5)
        return self.color_at((v - lo) / (hi - lo))


def bounce_palette() -> CategoricalPalette:
    """Bounce counts: blue 3, green 4, yellow 5; cropped above 6."""
    return CategoricalPalette(colors={0: "#555555", 1: "#8866aa",
                                      2: "#cc6677", 3: "#4477dd",
                                      4: "#44aa55", 5: "#eedd44",
                                      6: "#ee8833"}, crop=6.0)


def value_palette(vmin: float | None = None,
                  vmax: float | None = None) -> ContinuousPalette:
    return ContinuousPalette(vmin=vmin, vmax=vmax)


def _fmt_tick(v: float) -> str:
    s = f"{v:.4g}"
    return s


_PLOT_W = 520.0
_PLOT_H = 520.0
_ML, _MT, _MR, _MB = 76.0, 34.0, 128.0, 56.0


def render_heatmap(matrix, palette, out_path, x_axis=("axis1", 0.0, 1.0),
                   y_axis=("axis2", 0.0, 1.0), title: str | None = None,
                   overlays=()) -> None:
    """Write matrix as an SVG heatmap.

    matrix is indexed [i][j] with i along the horizontal axis and j along
    the vertical axis (j increasing upward). x_axis/y_axis are
    (label, lo, hi) in data coordinates; overlays is a sequence of
    (points, style) pairs where points is an (k, 2) array in data
    coordinates and style a dict with optional stroke/dash/width keys.
    """
    vals = np.asarray(matrix, dtype=float)
    n1, n2 = vals.shape
    xname, xlo, xhi = x_axis
    yname, ylo, yhi = y_axis
    cw = _PLOT_W / n1
    ch = _PLOT_H / n2
    width = _ML + _PLOT_W + _MR
    height = _MT + _PLOT_H + _MB

    continuous = isinstance(palette, ContinuousPalette)
    if continuous:
        lo, hi = palette.resolve(vals)

    def px(xd: float) -> float:
        return _ML + (xd - xlo) / (xhi - xlo) * _PLOT_W

    def py(yd: float) -> float:
        return _MT + (yhi - yd) / (yhi - ylo) * _PLOT_H

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" '
        f'fill="#ffffff"/>',
    ]
    if title:
        parts.append(f'<text x="{_ML + _PLOT_W / 2:.1f}" y="22" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="15">{title}</text>')

    for i in range(n1):
        x = _ML + i * cw
        for j in range(n2):
            y = _MT + (n2 - 1 - j) * ch
            v = vals[i, j]
            color = palette.color(v, lo, hi) if continuous \
                else palette.color(v)
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" '
                         f'width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" '
                         f'fill="{color}"/>')

    for pts, style in overlays:
        pts = np.asarray(pts, dtype=float)
        stroke = style.get("stroke", "#000000")
        swidth = style.get("width", 2.0)
        dash = style.get("dash")
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{stroke}" stroke-width="{swidth}"'
                     f'{dash_attr}/>')

    # frame and ticks
    parts.append(f'<rect x="{_ML:.1f}" y="{_MT:.1f}" width="{_PLOT_W:.1f}" '
                 f'height="{_PLOT_H:.1f}" fill="none" stroke="#000000" '
                 f'stroke-width="1"/>')
    for k in range(5):
        f = k / 4.0
        xd = xlo + f * (xhi - xlo)
        yd = ylo + f * (yhi - ylo)
        xp = _ML + f * _PLOT_W
        yp = _MT + _PLOT_H - f * _PLOT_H
        parts.append(f'<line x1="{xp:.1f}" y1="{_MT + _PLOT_H:.1f}" '
                     f'x2="{xp:.1f}" y2="{_MT + _PLOT_H + 5:.1f}" '
                     f'stroke="#000000" stroke-width="1"/>')
        parts.append(f'<text x="{xp:.1f}" y="{_MT + _PLOT_H + 19:.1f}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{_fmt_tick(xd)}</text>')
        parts.append(f'<line x1="{_ML - 5:.1f}" y1="{yp:.1f}" '
                     f'x2="{_ML:.1f}" y2="{yp:.1f}" '
                     f'stroke="#000000" stroke-width="1"/>')
        parts.append(f'<text x="{_ML - 9:.1f}" y="{yp + 4:.1f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{_fmt_tick(yd)}</text>')
    parts.append(f'<text x="{_ML + _PLOT_W / 2:.1f}" '
                 f'y="{_MT + _PLOT_H + 44:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13">{xname}</text>')
    parts.append(f'<text x="20" y="{_MT + _PLOT_H / 2:.1f}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13" transform="rotate(-90 20 '
                 f'{_MT + _PLOT_H / 2:.1f})">{yname}</text>')

    lx = _ML + _PLOT_W + 18
    if continuous:
        parts.append('<defs><linearGradient id="ramp" x1="0" y1="1" '
                     'x2="0" y2="0">')
        for k, stop in enumerate(palette.stops):
            off = k / (len(palette.stops) - 1)
            parts.append(f'<stop offset="{off:.3f}" stop-color="{stop}"/>')
        parts.append('</linearGradient></defs>')
        parts.append(f'<rect x="{lx:.1f}" y="{_MT:.1f}" width="16" '
                     f'height="{_PLOT_H:.1f}" fill="url(#ramp)" '
                     f'stroke="#000000" stroke-width="0.5"/>')
        parts.append(f'<text x="{lx + 22:.1f}" y="{_MT + 10:.1f}" '
                     f'font-family="sans-serif" font-size="11">'
                     f'{_fmt_tick(hi)}</text>')
        parts.append(f'<text x="{lx + 22:.1f}" y="{_MT + _PLOT_H:.1f}" '
                     f'font-family="sans-serif" font-size="11">'
                     f'{_fmt_tick(lo)}</text>')
    else:
        y = _MT
        for label, color in palette.legend():
            parts.append(f'<rect x="{lx:.1f}" y="{y:.1f}" width="16" '
                         f'height="16" fill="{color}" stroke="#000000" '
                         f'stroke-width="0.5"/>')
            parts.append(f'<text x="{lx + 22:.1f}" y="{y + 12:.1f}" '
                         f'font-family="sans-serif" font-size="12">'
                         f'{label}</text>')
            y += 22

    parts.append("</svg>")
    with open(out_path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
