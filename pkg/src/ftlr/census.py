"""Census transform and the census-patch backup matcher.

Each pixel gets an 8-bit code from its 3x3 neighbourhood: a bit is set when
the neighbour is strictly darker than the centre. Neighbours are visited in
row-major order, top-left first, and the first neighbour lands in the most
significant bit. Borders replicate the edge pixels.

The code is then spread over four channels by rotating it left 2, 4 and 6
bits, and the backup matcher correlates those four channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import normalized_xcorr

# (dy, dx) in bit order, MSB first.
NEIGHBOUR_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


class ComparisonCounter:
    """Tally of pixel comparisons made by :func:`census_transform`."""

    def __init__(self):
        self.count = 0


@dataclass(frozen=True, eq=False)
class CensusImage:
    codes: np.ndarray  # uint8, H x W

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    @property
    def width(self) -> int:
        return self.codes.shape[1]


@dataclass(frozen=True, eq=False)
class CensusChannels:
    values: np.ndarray  # uint8, H x W x 4

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def census_transform(image, counter: ComparisonCounter | None = None) -> CensusImage:
    """8-neighbour census codes of a patch or 2-D array."""
    img = np.asarray(getattr(image, "pixels", image), dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"census transform needs an image of at least 3x3, got {img.shape}")
    h, w = img.shape
    padded = np.pad(img, 1, mode="edge")
    codes = np.zeros((h, w), dtype=np.uint8)
    for bit, (dy, dx) in zip(range(7, -1, -1), NEIGHBOUR_OFFSETS):
        neighbour = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        codes |= (neighbour < img).astype(np.uint8) << np.uint8(bit)
        if counter is not None:
            counter.count += img.size
    return CensusImage(codes)


def rotl8(code, shift: int):
    """Circular left shift over 8 bits; works on ints and uint8 arrays."""
    shift %= 8
    if shift == 0:
        return code
    if isinstance(code, np.ndarray):
        c = code.astype(np.uint16)
        return (((c << shift) | (c >> (8 - shift))) & 0xFF).astype(np.uint8)
    return ((code << shift) | (code >> (8 - shift))) & 0xFF


def rotate_expand(census: CensusImage) -> CensusChannels:
    codes = census.codes
    return CensusChannels(np.stack([rotl8(codes, s) for s in (0, 2, 4, 6)], axis=-1))


def census_backup_match(template: CensusChannels, search: CensusChannels
                        ) -> tuple[tuple[float, float], float]:
    """Locate ``template`` inside ``search``.

    Returns ``((dx, dy), score)``: the displacement of the best placement from
    the search centre, in cells, and the summed 4-channel normalized
    correlation there. Near-ties go to the smallest displacement, then to
    row-major order.
    """
    th, tw = template.height, template.width
    sh, sw = search.height, search.width
    if th >= sh or tw >= sw:
        raise ValueError(f"template {th}x{tw} must be strictly smaller than search {sh}x{sw}")
    tv = template.values.astype(np.float64)
    sv = search.values.astype(np.float64)
    score = np.zeros((sh - th + 1, sw - tw + 1))
    for c in range(tv.shape[2]):
        score += normalized_xcorr(tv[..., c], sv[..., c])
    cy, cx = (sh - th) / 2.0, (sw - tw) / 2.0
    best = score.max()
    tol = 1e-9 * max(1.0, abs(best))
    rows, cols = np.nonzero(score >= best - tol)
    if rows.size > 1:
        dist = np.hypot(cols - cx, rows - cy)
        order = np.lexsort((cols, rows, dist))
        r, c = rows[order[0]], cols[order[0]]
    else:
        r, c = rows[0], cols[0]
    return (float(c - cx), float(r - cy)), float(score[r, c])


def write_pgm(census: CensusImage, path) -> None:
    """Dump census codes as a binary 8-bit PGM for inspection."""
    codes = np.ascontiguousarray(census.codes, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{codes.shape[1]} {codes.shape[0]}\n255\n".encode("ascii"))
        fh.write(codes.tobytes())
