"""Two-peak analysis of a response surface and the ratio-test confidence gate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PeakPair:
    p1_pos: tuple[int, int]  # (row, col)
    p1_val: float
    p2_pos: tuple[int, int] | None = None
    p2_val: float | None = None

    @property
    def has_second(self) -> bool:
        return self.p2_pos is not None


@dataclass(frozen=True)
class ConfidenceDecision:
    confident: bool
    ratio: float
    threshold: float
    # set when the best peak is not positive; the decision is then ambiguous
    # regardless of the ratio
    degenerate: bool = False


def _grid(response) -> np.ndarray:
    return np.asarray(getattr(response, "values", response), dtype=np.float64)


def project_profiles(response) -> tuple[np.ndarray, np.ndarray]:
    """Max-projections: (per-column maxima, per-row maxima)."""
    v = _grid(response)
    return v.max(axis=0), v.max(axis=1)


def find_profile_maxima(profile) -> list[int]:
    """Interior local maxima of a 1-D profile via its discrete derivatives.

    Position i qualifies when the forward difference goes from positive to
    non-positive there and the second difference is negative. A plateau is
    reported at its leftmost cell.
    """
    p = np.asarray(profile, dtype=np.float64)
    if p.size < 3:
        return []
    d1 = np.diff(p)
    d2 = np.diff(d1)  # d2[i-1] is the second difference centred on i
    hits = (d1[:-1] > 0) & (d1[1:] <= 0) & (d2 < 0)
    return [int(i) + 1 for i in np.flatnonzero(hits)]


def _climb(v: np.ndarray, r: int, c: int) -> tuple[int, int]:
    # steepest ascent over the 8-neighbourhood until no neighbour is higher
    h, w = v.shape
    while True:
        r0, r1 = max(r - 1, 0), min(r + 2, h)
        c0, c1 = max(c - 1, 0), min(c + 2, w)
        win = v[r0:r1, c0:c1]
        k = int(np.argmax(win))
        nr, nc = r0 + k // win.shape[1], c0 + k % win.shape[1]
        if v[nr, nc] <= v[r, c]:
            return r, c
        r, c = nr, nc


def top_two_peaks(response, min_separation: float = 3) -> PeakPair:
    """The two dominant peaks of a response surface.

    Candidates are the cross product of the column-profile and row-profile
    maxima plus the global argmax. Each candidate is moved uphill to the local
    maximum it sits under, so a peak whose row or column is shadowed by the
    other peak is still scored at its own summit. P2 is the best candidate at
    least ``min_separation`` cells (Euclidean) from P1.
    """
    if min_separation < 1:
        raise ValueError("min_separation must be >= 1")
    v = _grid(response)
    best = int(np.argmax(v))
    p1 = (best // v.shape[1], best % v.shape[1])
    xprof, yprof = project_profiles(v)
    cols = find_profile_maxima(xprof)
    rows = find_profile_maxima(yprof)
    candidates = {p1}
    for r in rows:
        for c in cols:
            candidates.add(_climb(v, r, c))
    p2 = None
    for pos in sorted(candidates):
        if math.hypot(pos[0] - p1[0], pos[1] - p1[1]) < min_separation:
            continue
        if p2 is None or v[pos] > v[p2]:
            p2 = pos
    p1_val = float(v[p1])
    if p2 is None:
        return PeakPair((int(p1[0]), int(p1[1])), p1_val)
    return PeakPair((int(p1[0]), int(p1[1])), p1_val, (int(p2[0]), int(p2[1])), float(v[p2]))


def nndr_decision(pair: PeakPair, threshold: float) -> ConfidenceDecision:
    """Confident iff P1/P2 exceeds ``threshold``.

    A missing or non-positive P2 gives an infinite ratio. A non-positive P1
    means the surface carries no match at all: ambiguous, flagged degenerate.
    """
    if not threshold > 1:
        raise ValueError(f"NNDR threshold must exceed 1, got {threshold}")
    if pair.p1_val <= 0:
        return ConfidenceDecision(False, 0.0, threshold, degenerate=True)
    if pair.p2_val is None or pair.p2_val <= 0:
        ratio = math.inf
    else:
        ratio = pair.p1_val / pair.p2_val
    return ConfidenceDecision(ratio > threshold, ratio, threshold)

