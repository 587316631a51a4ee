"""Valid-mode zero-mean normalized cross-correlation of feature maps.

The FFT path zero-pads the template to (at least) the search size; valid
placements never index past the search edge, so circular wraparound cannot
reach them. The direct path loops over placements and exists as a reference.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sfft

# windows whose summed squared deviation falls below this fraction of
# N * mean(search^2) are treated as flat and score 0
_FLAT_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class ResponseMap:
    """Correlation surface; ``center`` is the (row, col) of zero displacement."""

    values: np.ndarray
    center: tuple[float, float]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def displacement(self, row: int, col: int) -> tuple[float, float]:
        """(dx, dy) in cells of a response cell relative to the centre."""
        return (col - self.center[1], row - self.center[0])

    def argmax(self) -> tuple[int, int]:
        r, c = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(r), int(c)


def _as_grid(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def _check_shapes(t: np.ndarray, s: np.ndarray) -> None:
    if t.shape[0] >= s.shape[0] or t.shape[1] >= s.shape[1]:
        raise ValueError(f"template {t.shape[:2]} must be strictly smaller than search {s.shape[:2]}")


def normalized_xcorr(template: np.ndarray, search: np.ndarray, method: str = "fft") -> np.ndarray:
    """Single-channel valid-mode NCC, values in [-1, 1]."""
    t = np.asarray(template, dtype=np.float64)
    s = np.asarray(search, dtype=np.float64)
    _check_shapes(t, s)
    if method == "fft":
        return _ncc_fft(t, s)
    if method == "direct":
        return _ncc_direct(t, s)
    raise ValueError(f"unknown correlation method {method!r}")


def _template_terms(t):
    tz = t - t.mean()
    return tz, float(np.sqrt(np.sum(tz * tz)))


def _ncc_fft(t, s):
    th, tw = t.shape
    sh, sw = s.shape
    oh, ow = sh - th + 1, sw - tw + 1
    n = th * tw
    tz, tnorm = _template_terms(t)
    if tnorm <= 1e-12 * np.sqrt(n):
        return np.zeros((oh, ow))
    s0 = s - s.mean()
    shape = (sfft.next_fast_len(sh, real=True), sfft.next_fast_len(sw, real=True))
    spec = sfft.rfft2(s0, shape) * np.conj(sfft.rfft2(tz, shape))
    num = sfft.irfft2(spec, shape)[:oh, :ow]

    sums = _window_sums(s0, th, tw)
    sq = _window_sums(s0 * s0, th, tw)
    var = np.maximum(sq - sums * sums / n, 0.0)
    flat = var <= _FLAT_RTOL * n * max(float(np.mean(s0 * s0)), 1e-300)
    den = tnorm * np.sqrt(np.where(flat, 1.0, var))
    out = np.where(flat, 0.0, num / den)
    return np.clip(out, -1.0, 1.0)


def _window_sums(a, th, tw):
    ii = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=ii[1:, 1:])
    return ii[th:, tw:] - ii[:-th, tw:] - ii[th:, :-tw] + ii[:-th, :-tw]


def _ncc_direct(t, s):
    th, tw = t.shape
    n = th * tw
    tz, tnorm = _template_terms(t)
    windows = sliding_window_view(s, (th, tw))
    oh, ow = windows.shape[:2]
    out = np.zeros((oh, ow))
    if tnorm <= 1e-12 * np.sqrt(n):
        return out
    s0 = s - s.mean()
    flat_tol = _FLAT_RTOL * n * max(float(np.mean(s0 * s0)), 1e-300)
    for r in range(oh):
        for c in range(ow):
            w = windows[r, c]
            wz = w - w.mean()
            var = float(np.sum(wz * wz))
            if var <= flat_tol:
                continue
            out[r, c] = float(np.sum(tz * wz)) / (tnorm * np.sqrt(var))
    return np.clip(out, -1.0, 1.0)


def cross_correlate(template, search, method: str = "fft", workers: int = 1) -> ResponseMap:
    """Channel-averaged NCC of an H x W x C template against a search map.

    Per-channel surfaces are summed in channel order whatever ``workers`` is,
    so the result is bit-identical across worker counts.
    """
    t = _as_grid(template)
    s = _as_grid(search)
    if t.ndim == 2:
        t = t[..., None]
    if s.ndim == 2:
        s = s[..., None]
    if t.shape[2] != s.shape[2]:
        raise ValueError(f"channel mismatch: template has {t.shape[2]}, search has {s.shape[2]}")
    _check_shapes(t, s)
    channels = t.shape[2]

    def one(c):
        return normalized_xcorr(t[..., c], s[..., c], method)

    if workers > 1 and channels > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(channels)))
    else:
        parts = [one(c) for c in range(channels)]
    total = parts[0].copy()
    for p in parts[1:]:
        total += p
    if channels > 1:
        total /= channels
    center = ((s.shape[0] - t.shape[0]) / 2.0, (s.shape[1] - t.shape[1]) / 2.0)
    return ResponseMap(total, center)


def hann2d(height: int, width: int) -> np.ndarray:
    return np.outer(np.hanning(height), np.hanning(width))


def apply_motion_window(response: ResponseMap, strength: float) -> ResponseMap:
    """Blend the response with its Hann-weighted copy; strength 0 is identity."""
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"motion window strength must be in [0, 1], got {strength}")
    if strength == 0.0:
        return response
    v = response.values
    blended = (1.0 - strength) * v + strength * (v * hann2d(*v.shape))
    return ResponseMap(blended, response.center)


def write_response_csv(response: ResponseMap, path) -> None:
    np.savetxt(path, response.values, delimiter=",", fmt="%.9g")
