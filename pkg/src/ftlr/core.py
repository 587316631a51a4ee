"""Frames, boxes, patch cropping and the two box distances used for scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_CONTEXT_SCALE = 2.0
TEMPLATE_CONTEXT_SCALE = 1.0


@dataclass(frozen=True, eq=False)
class Frame:
    """Grayscale image with intensities in [0, 1]; ``index`` is 1-based."""

    pixels: np.ndarray
    index: int = 1

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"frame must be a non-empty 2-D grid, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("frame intensities must lie in [0, 1]")
        if px is self.pixels and px.flags.writeable:
            px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_uint8(cls, data: np.ndarray, index: int = 1) -> Frame:
        data = np.asarray(data)
        if data.ndim == 3:
            data = to_luma(data)
        return cls(data.astype(np.float64) / 255.0, index)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def mean(self) -> float:
        return float(self.pixels.mean())


def to_luma(rgb: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma of an H x W x 3 array, same dtype range as the input."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.rint(rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114)


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box dimensions must be positive, got w={self.w}, h={self.h}")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError("box coordinates must be finite")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> BoundingBox:
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def translated(self, dx: float, dy: float) -> BoundingBox:
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True, eq=False)
class Patch:
    """Square resampled window; ``spacing`` is frame pixels per patch pixel."""

    pixels: np.ndarray
    source_box: BoundingBox
    spacing: float = 1.0

    @property
    def side(self) -> int:
        return self.pixels.shape[0]


def crop_side(box: BoundingBox, area_factor: float = 1.0,
              context_scale: float = DEFAULT_CONTEXT_SCALE) -> float:
    """Side (frame pixels) of the square region covered by a crop."""
    return context_scale * math.sqrt(box.w * box.h) * math.sqrt(area_factor)


def crop_patch(frame: Frame, center_box: BoundingBox, area_factor: float = 1.0,
               out_side: int = 128, context_scale: float = DEFAULT_CONTEXT_SCALE) -> Patch:
    """Crop a square window centred on ``center_box`` and resample it.

    The covered side is ``context_scale * sqrt(w*h) * sqrt(area_factor)``, so
    doubling ``area_factor`` doubles the covered area. Samples falling outside
    the frame take the frame mean; samples inside are bilinearly interpolated
    with edge clamping.
    """
    if area_factor < 1:
        raise ValueError(f"area_factor must be >= 1, got {area_factor}")
    if out_side < 8:
        raise ValueError(f"out_side must be >= 8, got {out_side}")
    side = crop_side(center_box, area_factor, context_scale)
    spacing = side / out_side
    cx, cy = center_box.center
    offsets = (np.arange(out_side) + 0.5) * spacing - side / 2.0
    xs = cx + offsets
    ys = cy + offsets
    pixels = _bilinear_sample(frame.pixels, xs, ys, frame.mean)
    return Patch(pixels, center_box, spacing)


def _bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: float) -> np.ndarray:
    # xs/ys are continuous coordinates; pixel j covers [j, j+1).
    h, w = img.shape
    inside_x = (xs >= 0) & (xs < w)
    inside_y = (ys >= 0) & (ys < h)
    px = np.clip(xs - 0.5, 0.0, w - 1.0)
    py = np.clip(ys - 0.5, 0.0, h - 1.0)
    x0 = np.floor(px).astype(np.intp)
    y0 = np.floor(py).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (px - x0)[None, :]
    fy = (py - y0)[:, None]
    top = img[np.ix_(y0, x0)] * (1.0 - fx) + img[np.ix_(y0, x1)] * fx
    bottom = img[np.ix_(y1, x0)] * (1.0 - fx) + img[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy) + bottom * fy
    mask = inside_y[:, None] & inside_x[None, :]
    if not mask.all():
        out = np.where(mask, out, fill)
    return out


def iou(a: BoundingBox, b: BoundingBox) -> float:
    # areas come from the same rounded edges as the intersection, so
    # iou(a, a) is exactly 1
    ax1, ay1, bx1, by1 = a.x + a.w, a.y + a.h, b.x + b.w, b.y + b.h
    iw = min(ax1, bx1) - max(a.x, b.x)
    ih = min(ay1, by1) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax1 - a.x) * (ay1 - a.y) + (bx1 - b.x) * (by1 - b.y) - inter
    return min(inter / union, 1.0)


def center_error(a: BoundingBox, b: BoundingBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)
