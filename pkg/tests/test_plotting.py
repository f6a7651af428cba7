import re

import pytest

from biomeval.errors import EmptySeries, NonPositiveXOnLogScale
from biomeval.formats import write_curve_csv
from biomeval.plotting import PlotSpec, render_svg, write_svg
from biomeval.types import Curve

ROC = Curve("ROC", [0.0, 0.25, 0.5, 1.0], [0.0, 0.6, 0.9, 1.0])


def _polylines(svg):
    return re.findall(r'<polyline class="series"[^>]*points="([^"]*)"', svg)


def test_single_series_structure():
    svg = render_svg(PlotSpec("roc", [("a", ROC)], "linear"))
    assert svg.startswith("<?xml") and 'version="1.1"' in svg
    (points,) = _polylines(svg)
    assert len(points.split()) == len(ROC)
    assert "FAR" in svg and "TAR" in svg
    assert 'class="warning"' not in svg


def test_deterministic(tmp_path):
    spec = PlotSpec("roc", [("a", ROC), ("b", ROC)], "linear", (0.0, 1.0))
    a = write_svg(spec, tmp_path / "a.svg")
    write_svg(spec, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert a == render_svg(spec)


def test_legend_in_input_order():
    svg = render_svg(PlotSpec("", [("zeta", ROC), ("alpha", ROC)], "linear"))
    legend = svg[svg.index('<g class="legend">'):]
    assert legend.index("zeta") < legend.index("alpha")


def test_log_scale_rejects_zero_x():
    with pytest.raises(NonPositiveXOnLogScale):
        render_svg(PlotSpec("", [("a", ROC)], "log10"))
    # the automatic choice falls back to linear instead of failing
    assert "(log scale)" not in render_svg(PlotSpec("", [("a", ROC)]))
    assert "(log scale)" in render_svg(PlotSpec("", [("a", Curve("ROC", [0.01, 1], [0.5, 1]))]))


def test_log_scale_positive_curve():
    c = Curve("IET", [1e-3, 1e-2, 0.5], [0.9, 0.4, 0.1])
    svg = render_svg(PlotSpec("iet", [("g", c)]))
    assert "1e-3" in svg and "(log scale)" in svg


def test_empty_series():
    with pytest.raises(EmptySeries):
        render_svg(PlotSpec("", []))


def test_clipped_points_are_flagged():
    svg = render_svg(PlotSpec("", [("a", ROC)], "linear", (0.5, 1.0)))
    assert 'class="warning"' in svg and "1 point(s)" in svg


def test_cmc_integer_ticks_and_points_in_viewport():
    c = Curve("CMC", [1, 2, 3, 4], [0.5, 0.7, 0.9, 1.0])
    spec = PlotSpec("", [("g", c)], width_px=400, height_px=300)
    svg = render_svg(spec)
    for pair in _polylines(svg)[0].split():
        x, y = map(float, pair.split(","))
        assert 0 <= x <= 400 and 0 <= y <= 300
    assert ">3</text>" in svg


def test_reads_curve_files(tmp_path):
    write_curve_csv(ROC, tmp_path / "roc.csv")
    from_file = render_svg(PlotSpec("t", [("a", tmp_path / "roc.csv")], "linear"))
    assert from_file == render_svg(PlotSpec("t", [("a", ROC)], "linear"))
