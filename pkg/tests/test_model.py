import numpy as np
import pytest
from hypothesis import given, strategies as st

from clockink.errors import DegenerateBearingError, DrawingFormatError, EmptyDrawingError
from clockink.model import (Drawing, Stroke, bearing, bearing_diff, bearing_point, dump_drawing,
                            dump_ground_truth, load_drawing, parse_drawing, parse_ground_truth)
from clockink.synth import generate_drawings

angles = st.floats(0.0, 360.0, exclude_max=True, allow_nan=False)


def test_bearing_convention():
    c = (0.0, 0.0)
    assert bearing((0.0, -1.0), c) == pytest.approx(0.0)
    assert bearing((1.0, 0.0), c) == pytest.approx(90.0)
    assert bearing((0.0, 1.0), c) == pytest.approx(180.0)
    assert bearing((-1.0, 0.0), c) == pytest.approx(270.0)


def test_bearing_at_center_raises():
    with pytest.raises(DegenerateBearingError):
        bearing((2.0, 3.0), (2.0, 3.0))


@pytest.mark.parametrize("n", range(1, 13))
def test_bearing_point_round_trip(n):
    p = bearing_point((5.0, 7.0), 3.0, 30.0 * n)
    assert bearing_diff(bearing(p, (5.0, 7.0)), (30.0 * n) % 360) < 1e-9


def test_bearing_diff_examples():
    assert bearing_diff(10.0, 350.0) == pytest.approx(20.0)
    assert bearing_diff(0.0, 180.0) == pytest.approx(180.0)
    assert bearing_diff(42.0, 42.0) == 0.0


@given(angles, angles, angles)
def test_bearing_diff_is_a_metric(a, b, c):
    assert 0.0 <= bearing_diff(a, b) <= 180.0
    assert bearing_diff(a, b) == pytest.approx(bearing_diff(b, a))
    assert bearing_diff(a, c) <= bearing_diff(a, b) + bearing_diff(b, c) + 1e-9


def test_drawing_sorted_by_start_time():
    s1 = Stroke(0, [[0, 0, 500], [1, 1, 510], [2, 2, 520]])
    s2 = Stroke(1, [[0, 0, 0], [1, 1, 10], [2, 2, 20]])
    d = Drawing((s1, s2))
    assert [s.id for s in d.strokes] == [1, 0]
    assert len(d) == 2


def test_empty_drawing_raises():
    with pytest.raises(EmptyDrawingError):
        Drawing(())


def test_decreasing_timestamps_rejected():
    with pytest.raises(ValueError, match="decreasing"):
        Stroke(3, [[0, 0, 10], [1, 1, 5]])


def test_file_round_trip(tmp_path):
    _, d, gt = next(iter(generate_drawings("overwrite", 1, seed=3)))
    text = dump_drawing(d)
    again = parse_drawing(text)
    assert dump_drawing(again) == text
    assert again == d
    p = tmp_path / "x.json"
    p.write_text(text)
    assert load_drawing(p) == d
    gt2 = parse_ground_truth(dump_ground_truth(gt))
    assert dump_ground_truth(gt2) == dump_ground_truth(gt)


def test_malformed_file_reports_error():
    with pytest.raises(DrawingFormatError):
        parse_drawing("{not json")
    text = dump_drawing(Drawing((Stroke(0, [[0, 0, 0], [1, 0, 5]]),)))
    with pytest.raises(DrawingFormatError, match="stroke 0"):
        parse_drawing(text.replace("[1,0,5]", "[1,0,-5]").replace("[0,0,0]", "[0,0,9]"))
