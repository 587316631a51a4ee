import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftlr.core import BoundingBox, Frame, center_error, crop_patch, crop_side, iou

from conftest import box, textured_frame
from oracles import crop_loop

coord = st.floats(-200, 200, allow_nan=False)
size = st.floats(0.5, 100, allow_nan=False)
boxes = st.builds(BoundingBox, coord, coord, size, size)


def test_frame_rejects_out_of_range_and_is_read_only():
    with pytest.raises(ValueError):
        Frame(np.full((4, 4), 1.5))
    with pytest.raises(ValueError):
        Frame(np.zeros((0, 3)))
    f = Frame(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        f.pixels[0, 0] = 1.0


def test_frame_from_uint8_scales_to_unit_range():
    f = Frame.from_uint8(np.array([[0, 255], [51, 102]], dtype=np.uint8))
    assert f.pixels.tolist() == [[0.0, 1.0], [0.2, 0.4]]
    rgb = np.zeros((2, 2, 3), dtype=np.uint8)
    rgb[..., 1] = 255
    assert Frame.from_uint8(rgb).pixels.shape == (2, 2)


def test_box_rejects_non_positive_size():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0, 5)
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 5, -1)


def test_crop_of_constant_frame_is_constant():
    f = Frame(np.full((50, 60), 0.5))
    p = crop_patch(f, box(-10, 30, 20, 20), 1.0, 32)
    assert np.all(p.pixels == 0.5)
    assert p.side == 32


def test_area_factor_two_scales_side_by_sqrt2():
    b = box(40, 40, 30, 20)
    assert crop_side(b, 2.0) / crop_side(b, 1.0) == pytest.approx(math.sqrt(2), abs=1e-9)
    f = textured_frame()
    p1, p2 = crop_patch(f, b, 1.0, 64), crop_patch(f, b, 2.0, 64)
    assert p2.spacing / p1.spacing == pytest.approx(math.sqrt(2), abs=1e-9)


def test_crop_rejects_bad_parameters():
    f = textured_frame()
    with pytest.raises(ValueError):
        crop_patch(f, box(10, 10), 0.5, 64)
    with pytest.raises(ValueError):
        crop_patch(f, box(10, 10), 1.0, 4)


@pytest.mark.parametrize("cx,cy", [(0.0, 0.0), (160.0, 120.0), (3.3, 117.2), (80.0, 60.0)])
def test_crop_matches_scalar_reference(cx, cy):
    f = textured_frame(seed=4)
    b = BoundingBox.from_center(cx, cy, 24, 18)
    p = crop_patch(f, b, 1.5, 20)
    ref = crop_loop(f.pixels, cx, cy, crop_side(b, 1.5), 20)
    np.testing.assert_allclose(p.pixels, ref, atol=1e-12)


def test_corner_crop_pads_with_frame_mean():
    f = textured_frame(seed=2)
    p = crop_patch(f, BoundingBox.from_center(0, 0, 20, 20), 1.0, 16)
    # the top-left quadrant of the patch lies outside the frame
    assert np.all(p.pixels[:8, :8] == f.mean)


@given(dx=st.integers(-10, 10), dy=st.integers(-10, 10))
def test_crop_is_translation_consistent(dx, dy):
    big = textured_frame(seed=9, h=140, w=140).pixels
    inner = Frame(big[20:120, 20:120])
    shifted = Frame(big[20 + dy:120 + dy, 20 + dx:120 + dx])
    b = box(34, 34, 16, 16)
    a = crop_patch(inner, b, 1.0, 24).pixels
    c = crop_patch(shifted, b.translated(-dx, -dy), 1.0, 24).pixels
    np.testing.assert_allclose(a, c, atol=1e-6)


def test_iou_examples():
    a = BoundingBox(0, 0, 2, 2)
    assert iou(a, a) == 1.0
    assert iou(a, BoundingBox(5, 5, 1, 1)) == 0.0
    assert iou(a, BoundingBox(1, 0, 2, 2)) == pytest.approx(1 / 3)


def test_center_error_examples():
    a = BoundingBox.from_center(0, 0, 2, 2)
    assert center_error(a, a) == 0
    assert center_error(a, BoundingBox.from_center(3, 4, 2, 2)) == 5
    assert center_error(BoundingBox.from_center(1, 1, 2, 2), BoundingBox.from_center(1, 2, 4, 4)) == 1


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0


@given(boxes, boxes, st.floats(-50, 50), st.floats(-50, 50))
def test_iou_translation_invariant(a, b, dx, dy):
    assert iou(a, a) == 1.0
    assert iou(a.translated(dx, dy), b.translated(dx, dy)) == pytest.approx(iou(a, b), abs=1e-9)


@given(boxes, boxes, boxes)
def test_center_error_triangle_inequality(a, b, c):
    assert center_error(a, c) <= center_error(a, b) + center_error(b, c) + 1e-9
