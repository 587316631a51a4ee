"""Feature extractors standing in for the learned embedding.

An extractor is any object with ``name``, ``channel_count`` and a call
``extractor(patch) -> FeatureMap``. Outputs keep the patch resolution.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .census import census_transform, rotate_expand


@dataclass(frozen=True, eq=False)
class FeatureMap:
    values: np.ndarray  # H x W x C float64

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 2:
            v = v[..., None]
        if v.ndim != 3 or v.shape[2] < 1:
            raise ValueError(f"feature map must be H x W x C, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


class FeatureExtractor(Protocol):
    name: str
    channel_count: int

    def __call__(self, patch) -> FeatureMap: ...


def _pixels(patch) -> np.ndarray:
    return np.asarray(getattr(patch, "pixels", patch), dtype=np.float64)


def extract_grayscale(patch) -> FeatureMap:
    """Zero-mean, unit-variance intensities (variance floored at 1e-12)."""
    p = _pixels(patch)
    z = p - p.mean()
    var = max(float(np.mean(z * z)), 1e-12)
    return FeatureMap((z / np.sqrt(var))[..., None])


def extract_census_channels(patch) -> FeatureMap:
    """Rotated census channels scaled to [0, 1], each made zero-mean."""
    ch = rotate_expand(census_transform(_pixels(patch))).values.astype(np.float64) / 255.0
    ch -= ch.mean(axis=(0, 1), keepdims=True)
    return FeatureMap(ch)


@dataclass(frozen=True)
class _Extractor:
    name: str
    channel_count: int
    fn: object

    def __call__(self, patch) -> FeatureMap:
        return self.fn(patch)


EXTRACTORS = {
    "grayscale": _Extractor("grayscale", 1, extract_grayscale),
    "census": _Extractor("census", 4, extract_census_channels),
}


def get_extractor(name: str) -> FeatureExtractor:
    try:
        return EXTRACTORS[name]
    except KeyError:
        raise ValueError(f"unknown extractor {name!r}; choose from {sorted(EXTRACTORS)}") from None


# Binary layout: H, W, C as little-endian uint32, then H*W*C little-endian
# float32 values, row-major with the channel index varying fastest.
_HEADER = struct.Struct("<III")


def write_feature_file(fmap: FeatureMap, path) -> None:
    v = np.ascontiguousarray(fmap.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*v.shape))
        fh.write(v.tobytes())


def read_feature_file(path) -> FeatureMap:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated feature header")
    h, w, c = _HEADER.unpack_from(data)
    expected = _HEADER.size + 4 * h * w * c
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {h}x{w}x{c}, found {len(data)}")
    vals = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(h, w, c)
    return FeatureMap(vals.astype(np.float64))
