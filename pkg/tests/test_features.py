import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftlr.census import census_transform, rotate_expand
from ftlr.features import (EXTRACTORS, FeatureMap, extract_census_channels, extract_grayscale,
                           get_extractor, read_feature_file, write_feature_file)


def test_grayscale_of_constant_patch_is_zero():
    assert np.all(extract_grayscale(np.full((8, 8), 0.3)).values == 0.0)


def test_grayscale_removes_offset(rng):
    p = rng.uniform(0, 0.8, (12, 12))
    np.testing.assert_allclose(extract_grayscale(p).values, extract_grayscale(p + 0.1).values,
                               atol=1e-12)


def test_grayscale_two_by_two_by_hand():
    # mean 0.25, population variance 0.1875
    out = extract_grayscale(np.array([[0.0, 0.0], [0.0, 1.0]])).values[..., 0]
    s = np.sqrt(0.1875)
    np.testing.assert_allclose(out, [[-0.25 / s, -0.25 / s], [-0.25 / s, 0.75 / s]])


def test_census_channels_of_constant_patch_are_zero():
    out = extract_census_channels(np.full((10, 10), 0.7))
    assert out.channels == 4
    assert np.all(out.values == 0.0)


def test_census_channels_ignore_gamma(rng):
    p = rng.uniform(0.01, 1, (16, 16))
    np.testing.assert_array_equal(extract_census_channels(p).values,
                                  extract_census_channels(p ** 2.2).values)


def test_census_channels_compose_census_ops(rng):
    p = rng.uniform(0, 1, (16, 16))
    ch = rotate_expand(census_transform(p)).values.astype(np.float64) / 255.0
    ch = ch - ch.mean(axis=(0, 1))
    np.testing.assert_allclose(extract_census_channels(p).values, ch, atol=1e-15)


@pytest.mark.parametrize("name", sorted(EXTRACTORS))
def test_extractor_contract(name, rng):
    ex = get_extractor(name)
    for side in (8, 13, 32):
        p = rng.uniform(0, 1, (side, side))
        a, b = ex(p), ex(p.copy())
        np.testing.assert_array_equal(a.values, b.values)
        assert a.shape == (side, side, ex.channel_count)
        assert np.all(np.isfinite(a.values))
        assert np.all(np.abs(a.values.mean(axis=(0, 1))) < 1e-6)


@pytest.mark.parametrize("name", sorted(EXTRACTORS))
@given(k=st.integers(1, 4))
def test_extractors_are_translation_equivariant_inside(name, k):
    base = np.random.default_rng(k).uniform(0, 1, (40, 40))
    a = base[:32, :32]
    b = base[k:32 + k, :32]
    ex = get_extractor(name)
    fa, fb = ex(a).values, ex(b).values
    # undo the per-map normalization before comparing shifted content
    if name == "grayscale":
        fa = fa * a.std() + a.mean()
        fb = fb * b.std() + b.mean()
    else:
        fa = rotate_expand(census_transform(a)).values
        fb = rotate_expand(census_transform(b)).values
    np.testing.assert_allclose(fa[k + 1:-1, 1:-1], fb[1:-1 - k, 1:-1], atol=1e-6)


def test_unknown_extractor():
    with pytest.raises(ValueError, match="unknown extractor"):
        get_extractor("vgg")


def test_feature_file_round_trip_and_layout(tmp_path, rng):
    v = rng.standard_normal((3, 4, 2)).astype(np.float32).astype(np.float64)
    path = tmp_path / "f.bin"
    write_feature_file(FeatureMap(v), path)
    raw = path.read_bytes()
    assert raw[:12] == bytes([3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0])
    # channel index varies fastest
    assert np.frombuffer(raw[12:20], "<f4").tolist() == [v[0, 0, 0], v[0, 0, 1]]
    np.testing.assert_array_equal(read_feature_file(path).values, v)


def test_feature_file_length_checked(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(bytes([2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]) + b"\0" * 8)
    with pytest.raises(ValueError, match="expected 28 bytes"):
        read_feature_file(path)
