import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftlr.census import (CensusImage, ComparisonCounter, census_backup_match, census_transform,
                         rotate_expand, rotl8, write_pgm)

from oracles import census_loop


def channels(img):
    return rotate_expand(census_transform(img))


def test_constant_image_gives_zero_codes():
    assert np.all(census_transform(np.full((5, 7), 0.4)).codes == 0)


def test_bright_center_gives_255():
    img = np.full((3, 3), 0.1)
    img[1, 1] = 0.9
    assert census_transform(img).codes[1, 1] == 255


def test_bit_order_is_row_major_msb_first():
    img = np.full((3, 3), 0.5)
    img[0, 0] = 0.0  # top-left neighbour darker -> MSB
    img[2, 2] = 0.0  # bottom-right neighbour darker -> LSB
    assert census_transform(img).codes[1, 1] == 0b10000001


def test_matches_scalar_oracle(rng):
    for _ in range(5):
        img = rng.integers(0, 4, (9, 11)).astype(float)  # many ties
        np.testing.assert_array_equal(census_transform(img).codes, census_loop(img))


def test_rejects_tiny_images():
    with pytest.raises(ValueError):
        census_transform(np.zeros((2, 5)))


def test_square_map_invariance(rng):
    u = rng.uniform(0, 1, (8, 8))
    np.testing.assert_array_equal(census_transform(u).codes, census_transform(u ** 2).codes)


def test_comparison_count_is_eight_per_pixel():
    counter = ComparisonCounter()
    census_transform(np.zeros((13, 17)), counter)
    assert counter.count == 8 * 13 * 17


@pytest.mark.parametrize("code,expected", [(1, (1, 4, 16, 64)), (128, (128, 2, 8, 32)),
                                           (255, (255, 255, 255, 255))])
def test_rotate_expand_examples(code, expected):
    ch = rotate_expand(CensusImage(np.array([[code]], dtype=np.uint8))).values
    assert tuple(int(v) for v in ch[0, 0]) == expected


def test_rotate_expand_conserves_popcount_for_all_codes():
    codes = np.arange(256, dtype=np.uint8).reshape(16, 16)
    ch = rotate_expand(CensusImage(codes)).values
    pop = np.unpackbits(codes[..., None], axis=-1).sum(-1)
    for k in range(4):
        assert np.array_equal(np.unpackbits(ch[..., k:k + 1], axis=-1).sum(-1), pop)
    assert np.array_equal(ch[..., 0], codes)


@given(st.integers(0, 255), st.integers(0, 16))
def test_rotl8_int_and_array_agree(code, shift):
    arr = rotl8(np.array([code], dtype=np.uint8), shift)
    assert int(arr[0]) == rotl8(code, shift)
    assert rotl8(rotl8(code, shift), 8 - shift % 8) == code


def _embed(rng, dx, dy, th=9, sh=25):
    search = rng.uniform(0, 1, (sh, sh))
    template = rng.uniform(0, 1, (th, th))
    c = (sh - th) // 2
    search[c + dy:c + dy + th, c + dx:c + dx + th] = template
    return template, search


@pytest.mark.parametrize("dx,dy", [(0, 0), (3, -2), (-5, 4), (8, 8)])
def test_backup_match_finds_planted_template(dx, dy, rng):
    template, search = _embed(rng, dx, dy)
    (mx, my), score = census_backup_match(channels(template), channels(search))
    assert (mx, my) == (dx, dy)
    # brute-force: score every placement of the census channels
    tv, sv = channels(template).values, channels(search).values
    best = None
    for r in range(sv.shape[0] - 8):
        for c in range(sv.shape[1] - 8):
            win = sv[r:r + 9, c:c + 9].astype(float)
            tot = 0.0
            for k in range(4):
                a = tv[..., k] - tv[..., k].mean()
                b = win[..., k] - win[..., k].mean()
                den = np.sqrt((a * a).sum() * (b * b).sum())
                tot += 0.0 if den == 0 else float((a * b).sum() / den)
            if best is None or tot > best[0]:
                best = (tot, c - 8, r - 8)
    assert best[1:] == (dx, dy)
    assert score == pytest.approx(best[0], abs=1e-9)


def test_backup_match_center_self_match_scores_four(rng):
    template, search = _embed(rng, 0, 0)
    (mx, my), score = census_backup_match(channels(template), channels(search))
    assert (mx, my) == (0, 0)
    assert score <= 4.0 + 1e-9 and score > 3.0


def test_backup_match_survives_gamma(rng):
    template, search = _embed(rng, 2, -3)
    d1, _ = census_backup_match(channels(template), channels(search))
    d2, _ = census_backup_match(channels(template), channels(search ** 0.5))
    assert d1 == d2 == (2, -3)


@given(a=st.integers(-4, 4), b=st.integers(-4, 4))
def test_backup_match_displacement_equivariance(a, b):
    rng = np.random.default_rng(100 + 9 * a + b)
    template, search = _embed(rng, a, b)
    (dx, dy), _ = census_backup_match(channels(template), channels(search))
    assert (dx, dy) == (a, b)


def test_backup_match_tie_prefers_smallest_displacement():
    # a flat search: every placement scores 0, so the centre wins
    t = channels(np.random.default_rng(0).uniform(0, 1, (5, 5)))
    s = channels(np.full((11, 11), 0.5))
    (dx, dy), score = census_backup_match(t, s)
    assert (dx, dy) == (0, 0) and score == 0.0


def test_backup_match_rejects_large_template(rng):
    with pytest.raises(ValueError):
        census_backup_match(channels(rng.uniform(0, 1, (9, 9))), channels(rng.uniform(0, 1, (9, 12))))


def test_write_pgm(tmp_path):
    path = tmp_path / "c.pgm"
    write_pgm(CensusImage(np.array([[1, 2, 3]], dtype=np.uint8)), path)
    assert path.read_bytes() == b"P5\n3 1\n255\n\x01\x02\x03"
