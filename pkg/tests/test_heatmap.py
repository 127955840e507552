"""SVG heatmap rendering: palettes, cell colors, overlays, determinism."""
import math
import re

import numpy as np
import pytest

from zenoball import (
    CategoricalPalette,
    ContinuousPalette,
    bounce_palette,
    render_heatmap,
    value_palette,
)

NAN = float("nan")


def rect_fills(svg: str) -> list[str]:
    return re.findall(r'<rect [^>]*fill="(#[0-9a-f]{6})"', svg)


class TestCategoricalPalette:
    def test_study_colors(self):
        pal = bounce_palette()
        assert pal.color(3) == "#4477dd"   # blue
        assert pal.color(4) == "#44aa55"   # green
        assert pal.color(5) == "#eedd44"   # yellow
        assert pal.color(NAN) == "#ffffff"

    def test_crop_above_six(self):
        pal = bounce_palette()
        assert pal.crop == 6.0
        assert pal.color(6) != pal.over_color
        assert pal.color(7) == pal.over_color
        assert pal.color(40) == pal.over_color

    def test_unmapped_category_falls_through(self):
        pal = CategoricalPalette(colors={0: "#111111"})
        assert pal.color(3) == pal.over_color

    def test_legend_lists_categories_then_markers(self):
        pal = bounce_palette()
        legend = pal.legend()
        labels = [lab for lab, _ in legend]
        assert labels[:7] == ["0", "1", "2", "3", "4", "5", "6"]
        assert labels[-2:] == ["> 6", "zeno"]


class TestContinuousPalette:
    def test_extremes_hit_end_stops(self):
        pal = ContinuousPalette()
        assert pal.color_at(0.0) == pal.stops[0]
        assert pal.color_at(1.0) == pal.stops[-1]
        assert pal.color_at(-3.0) == pal.stops[0]
        assert pal.color_at(7.0) == pal.stops[-1]

    def test_resolve_uses_finite_range(self):
        pal = ContinuousPalette()
        vals = np.array([1.0, NAN, 4.0, math.inf])
        assert pal.resolve(vals) == (1.0, 4.0)
        pinned = value_palette(vmin=0.0, vmax=10.0)
        assert pinned.resolve(vals) == (0.0, 10.0)

    def test_color_maps_range(self):
        pal = ContinuousPalette()
        assert pal.color(0.0, 0.0, 1.0) == pal.stops[0]
        assert pal.color(1.0, 0.0, 1.0) == pal.stops[-1]
        assert pal.color(NAN, 0.0, 1.0) == pal.nan_color

    def test_degenerate_range(self):
        pal = ContinuousPalette()
        assert pal.color(5.0, 5.0, 5.0) == pal.color_at(0.5)


class TestRender:
    @pytest.fixture()
    def svg_path(self, tmp_path):
        return tmp_path / "map.svg"

    def test_categorical_cells(self, svg_path):
        matrix = [[3.0, 4.0], [5.0, NAN]]
        render_heatmap(matrix, bounce_palette(), svg_path,
                       x_axis=("a", 0.0, 1.0), y_axis=("b", 0.0, 1.0))
        svg = svg_path.read_text()
        fills = rect_fills(svg)
        for color in ("#4477dd", "#44aa55", "#eedd44"):
            assert fills.count(color) >= 1
        # one white background rect plus the NaN cell
        assert fills.count("#ffffff") >= 2

    def test_cropped_cells_use_over_color(self, svg_path):
        matrix = [[7.0, 3.0], [12.0, 3.0]]
        pal = bounce_palette()
        render_heatmap(matrix, pal, svg_path)
        fills = rect_fills(svg_path.read_text())
        # two cropped cells plus the legend swatch
        assert fills.count(pal.over_color) == 3

    def test_rerender_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(7)
        matrix = rng.normal(size=(9, 9))
        matrix[2, 3] = NAN
        a = tmp_path / "a.svg"
        b = tmp_path / "b.svg"
        for path in (a, b):
            render_heatmap(matrix, value_palette(), path,
                           x_axis=("x", 0.0, 2.0), y_axis=("p", -2.0, 2.0),
                           title="value")
        assert a.read_bytes() == b.read_bytes()

    def test_overlay_polyline(self, svg_path):
        matrix = [[1.0, 2.0], [3.0, 4.0]]
        pts = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 0.25]])
        render_heatmap(matrix, value_palette(), svg_path,
                       overlays=[(pts, {"stroke": "#ff0000",
                                        "dash": "6,4"})])
        svg = svg_path.read_text()
        lines = re.findall(r'<polyline [^>]*/>', svg)
        assert len(lines) == 1
        assert 'stroke="#ff0000"' in lines[0]
        assert 'stroke-dasharray="6,4"' in lines[0]
        assert len(lines[0].split("points=\"")[1].split("\"")[0]
                   .split()) == 3

    def test_axis_labels_and_ticks(self, svg_path):
        matrix = [[1.0]] * 2
        render_heatmap(matrix, value_palette(), svg_path,
                       x_axis=("seed px", -2.0, 2.0),
                       y_axis=("seed pp", -2.0, 2.0), title="bounce count")
        svg = svg_path.read_text()
        assert ">seed px</text>" in svg
        assert ">seed pp</text>" in svg
        assert ">bounce count</text>" in svg
        for tick in ("-2", "-1", "0", "1", "2"):
            assert f">{tick}</text>" in svg

    def test_continuous_legend_bounds(self, svg_path):
        matrix = [[0.0, 2.5], [5.0, 10.0]]
        render_heatmap(matrix, value_palette(), svg_path)
        svg = svg_path.read_text()
        assert ">10</text>" in svg
        assert ">0</text>" in svg
        assert "linearGradient" in svg

    def test_categorical_legend_swatches(self, svg_path):
        render_heatmap([[3.0]], bounce_palette(), svg_path)
        svg = svg_path.read_text()
        assert ">zeno</text>" in svg
        assert "&gt; 6</text>" in svg or "> 6</text>" in svg
