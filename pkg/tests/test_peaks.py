import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftlr.peaks import PeakPair, find_profile_maxima, nndr_decision, project_profiles, top_two_peaks

from oracles import strict_peaks_1d, two_gaussians, two_peaks_bruteforce


def test_profiles_of_constant_map():
    x, y = project_profiles(np.full((4, 6), 0.3))
    assert np.all(x == 0.3) and np.all(y == 0.3)
    assert (x.size, y.size) == (6, 4)


def test_profiles_of_spike():
    v = np.zeros((7, 9))
    v[2, 5] = 1.0
    x, y = project_profiles(v)
    assert list(np.flatnonzero(x == x.max())) == [5]
    assert list(np.flatnonzero(y == y.max())) == [2]


def test_profiles_match_row_and_column_scan():
    v = two_gaussians((20, 25), (5, 6), 1.0, (14, 18), 0.6)
    x, y = project_profiles(v)
    assert x.tolist() == [max(v[r, c] for r in range(20)) for c in range(25)]
    assert y.tolist() == [max(v[r, c] for c in range(25)) for r in range(20)]


def test_profile_maxima_examples():
    assert find_profile_maxima([1, 2, 3, 4]) == []
    assert find_profile_maxima([0, 1, 0, 2, 0]) == [1, 3]
    assert find_profile_maxima([0, 1]) == []
    # plateau of two: reported at its leftmost cell
    assert find_profile_maxima([0, 2, 2, 0]) == [1]


def test_profile_maxima_match_neighbour_scan_on_smooth_profiles():
    rng = np.random.default_rng(3)
    from scipy.ndimage import gaussian_filter1d
    for _ in range(1000):
        p = gaussian_filter1d(rng.standard_normal(40), 2.0)
        assert find_profile_maxima(p) == strict_peaks_1d(p)


def test_single_bump_has_no_second_peak():
    rr, cc = np.mgrid[0:21, 0:21]
    v = np.exp(-((rr - 9) ** 2 + (cc - 12) ** 2) / 8.0)
    pair = top_two_peaks(v)
    assert pair.p1_pos == (9, 12)
    assert pair.p2_pos is None
    assert nndr_decision(pair, 1.2).ratio == math.inf


def test_two_gaussians_ratio_two():
    v = two_gaussians((33, 33), (8, 8), 1.0, (24, 22), 0.5)
    pair = top_two_peaks(v)
    assert pair.p1_val / pair.p2_val == pytest.approx(2.0, rel=0.05)


def test_shadowed_second_peak_is_found():
    # both peaks share a row; the weaker one is invisible in the row profile
    v = two_gaussians((25, 40), (12, 8), 1.0, (12, 30), 0.7)
    pair = top_two_peaks(v)
    assert pair.p2_pos == (12, 30)


@given(st.integers(0, 5000))
def test_p1_is_global_argmax_and_pair_invariants(seed):
    v = np.random.default_rng(seed).standard_normal((15, 17))
    pair = top_two_peaks(v, min_separation=3)
    assert pair.p1_pos == np.unravel_index(np.argmax(v), v.shape)
    if pair.p2_pos is not None:
        assert pair.p1_val >= pair.p2_val
        assert math.dist(pair.p1_pos, pair.p2_pos) >= 3


def test_agrees_with_bruteforce_scan():
    rng = np.random.default_rng(11)
    for _ in range(100):
        ratio = rng.uniform(1.1, 4.0)
        p1 = (int(rng.integers(5, 30)), int(rng.integers(5, 30)))
        while True:
            p2 = (int(rng.integers(5, 30)), int(rng.integers(5, 30)))
            if math.dist(p1, p2) > 10:
                break
        v = two_gaussians((35, 35), p1, 1.0, p2, 1.0 / ratio)
        pair = top_two_peaks(v)
        bp1, b1, bp2, b2 = two_peaks_bruteforce(v, 3)
        assert pair.p1_pos == bp1
        assert (pair.p1_val / pair.p2_val) == pytest.approx(b1 / b2, rel=0.05)


def test_decision_examples():
    d = nndr_decision(PeakPair((0, 0), 1.0, (5, 5), 0.4), 2.0)
    assert d.confident and d.ratio == pytest.approx(2.5)
    d = nndr_decision(PeakPair((0, 0), 1.0, (5, 5), 0.9), 1.2)
    assert not d.confident and d.ratio == pytest.approx(1.111, abs=1e-3)
    d = nndr_decision(PeakPair((0, 0), 1.0), 1.2)
    assert d.confident and d.ratio == math.inf
    d = nndr_decision(PeakPair((0, 0), 0.5, (4, 0), -0.2), 1.2)
    assert d.confident and d.ratio == math.inf


def test_non_positive_p1_is_degenerate():
    d = nndr_decision(PeakPair((0, 0), -0.1, (5, 5), -0.3), 1.2)
    assert not d.confident and d.degenerate


def test_threshold_must_exceed_one():
    with pytest.raises(ValueError):
        nndr_decision(PeakPair((0, 0), 1.0), 1.0)
    with pytest.raises(ValueError):
        top_two_peaks(np.zeros((4, 4)), min_separation=0.5)


@given(seed=st.integers(0, 1000), lam=st.floats(1e-3, 1e3), thr=st.floats(1.01, 5.0))
def test_decision_is_scale_invariant(seed, lam, thr):
    v = np.random.default_rng(seed).standard_normal((12, 12))
    a = nndr_decision(top_two_peaks(v), thr)
    b = nndr_decision(top_two_peaks(v * lam), thr)
    assert a.confident == b.confident
    assert top_two_peaks(v).p1_pos == top_two_peaks(v * lam).p1_pos


@given(p1=st.floats(0.01, 10), frac=st.floats(0.01, 1.0), t1=st.floats(1.01, 5), t2=st.floats(1.01, 5))
def test_threshold_monotonicity(p1, frac, t1, t2):
    pair = PeakPair((0, 0), p1, (9, 9), p1 * frac)
    lo, hi = sorted((t1, t2))
    if not nndr_decision(pair, lo).confident:
        assert not nndr_decision(pair, hi).confident


@given(thr=st.floats(1.0001, 100))
def test_unimodal_confident_and_equal_peaks_ambiguous(thr):
    single = two_gaussians((21, 21), (10, 10), 1.0, (0, 0), 0.0)
    assert nndr_decision(top_two_peaks(single), thr).confident
    twin = two_gaussians((21, 31), (10, 7), 1.0, (10, 23), 1.0)
    assert not nndr_decision(top_two_peaks(twin), thr).confident
