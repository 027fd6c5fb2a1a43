import xml.etree.ElementTree as ET

import pytest

from msde.svg import LinePlot, SvgError


def _plot():
    plot = LinePlot(title="decay", xlabel="t", ylabel="x")
    plot.add("slow", [0.0, 1.0, 2.0, 3.0], [1.0, 0.5, 0.25, 0.125])
    plot.add("fast", [0.0, 1.0, 2.0, 3.0], [1.0, 0.1, 0.01, 0.001])
    return plot


def test_output_is_wellformed_svg():
    text = _plot().to_svg()
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    assert 'viewBox="0 0 640 420"' in text
    flat = ET.tostring(root, encoding="unicode")
    assert "polyline" in flat
    for label in ("decay", "slow", "fast", "t", "x"):
        assert label in text


def test_same_input_same_bytes(tmp_path):
    a = _plot().to_svg()
    b = _plot().to_svg()
    assert a == b
    path = _plot().write(tmp_path / "plot.svg")
    assert path.read_text(encoding="utf-8") == a


def test_text_is_escaped():
    plot = LinePlot(title="a<b & c>d")
    plot.add('q"q', [0.0, 1.0], [0.0, 1.0])
    text = plot.to_svg()
    assert "a<b" not in text
    assert "&lt;" in text and "&amp;" in text
    ET.fromstring(text)  # still parses


def test_log_axis_rejects_nonpositive_values():
    plot = LinePlot(yscale="log")
    plot.add("bad", [1.0, 2.0], [1.0, 0.0])
    with pytest.raises(SvgError, match="log y axis"):
        plot.to_svg()
    plot = LinePlot(xscale="log")
    plot.add("bad", [-1.0, 2.0], [1.0, 2.0])
    with pytest.raises(SvgError, match="log x axis"):
        plot.to_svg()


def test_log_axis_accepts_positive_values():
    plot = LinePlot(xscale="log", yscale="log")
    plot.add("ok", [1e-3, 1e-2, 1e-1], [1e-6, 1e-4, 1e-2])
    text = plot.to_svg()
    assert "polyline" in text


def test_unknown_scale_rejected():
    plot = LinePlot(xscale="cubic")
    plot.add("s", [0.0, 1.0], [0.0, 1.0])
    with pytest.raises(SvgError, match="cubic"):
        plot.to_svg()


def test_validation_errors():
    plot = LinePlot()
    with pytest.raises(SvgError, match="at least one series"):
        plot.to_svg()
    with pytest.raises(SvgError, match="3 points"):
        plot.add("s", [0.0, 1.0, 2.0], [0.0, 1.0])
    with pytest.raises(SvgError, match="empty"):
        plot.add("s", [], [])
    plot.add("nan", [0.0, 1.0], [float("nan"), float("nan")])
    with pytest.raises(SvgError, match="finite"):
        plot.to_svg()


def test_constant_series_still_renders():
    plot = LinePlot()
    plot.add("flat", [0.0, 1.0, 2.0], [3.0, 3.0, 3.0])
    root = ET.fromstring(plot.to_svg())
    assert root.tag.endswith("svg")
