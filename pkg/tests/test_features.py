import colorsys
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcascade import features
from semcascade.errors import InvalidParamsError, ShapeError
from semcascade.features import Color, FeatureConfig

rgb = st.tuples(*[st.integers(0, 255)] * 3)


@given(rgb)
def test_hsv_matches_colorsys(pixel):
    h, s, v = features.rgb_to_hsv(pixel)
    eh, es, ev = colorsys.rgb_to_hsv(*(c / 255.0 for c in pixel))
    assert math.isclose(s, es, abs_tol=1e-12)
    assert math.isclose(v, ev, abs_tol=1e-12)
    if es > 0:
        diff = abs(h - eh * 360.0) % 360.0
        assert min(diff, 360.0 - diff) < 1e-9


@given(st.lists(rgb, min_size=1, max_size=20))
def test_vector_hsv_matches_scalar(pixels):
    arr = np.array(pixels, dtype=np.uint8).reshape(1, -1, 3)
    out = features.rgb_to_hsv_array(arr)[0]
    for p, row in zip(pixels, out):
        assert np.allclose(row, features.rgb_to_hsv(p), atol=1e-12)


@given(st.floats(0, 360, exclude_max=True), st.floats(0, 1), st.floats(0, 1))
def test_every_hsv_lands_in_exactly_one_bucket(h, s, v):
    color = features.hue_bucket(h, s, v)
    assert isinstance(color, Color)
    codes = features.bucket_codes(np.array([[h, s, v]]))
    assert codes[0] == color.code


@pytest.mark.parametrize("pixel,expected", [
    ((255, 0, 0), Color.RED),
    ((0, 255, 0), Color.GREEN),
    ((0, 0, 255), Color.BLUE),
    ((0, 255, 255), Color.CYAN),
    ((250, 250, 250), Color.WHITE),
    ((10, 10, 10), Color.BLACK),
    # 60 degrees sits in the second of eight equal buckets
    ((255, 255, 0), Color.ORANGE),
    # grey has no hue; with low value it is black, mid value falls through to hue 0
    ((128, 128, 128), Color.RED),
])
def test_named_pixels(pixel, expected):
    assert features.hue_bucket(*features.rgb_to_hsv(pixel)) is expected


def test_bucket_centres_map_back_to_their_bucket():
    for color in features.CHROMATIC:
        assert features.hue_bucket(*features.rgb_to_hsv(features.color_rgb(color))) is color
    assert features.hue_bucket(*features.rgb_to_hsv(features.color_rgb(Color.WHITE))) is Color.WHITE
    assert features.hue_bucket(*features.rgb_to_hsv(features.color_rgb(Color.BLACK))) is Color.BLACK


def test_bucket_boundaries_are_half_open():
    assert features.hue_bucket(22.5, 1, 1) is Color.ORANGE
    assert features.hue_bucket(22.4999, 1, 1) is Color.RED
    assert features.hue_bucket(337.5, 1, 1) is Color.RED
    assert features.hue_bucket(337.4999, 1, 1) is Color.MAGENTA


def test_bank_kernel_sizes_on_32px():
    bank = features.gabor_bank(32)
    assert len(bank) == 20
    sizes = sorted({d.params.kernel_size for d in bank})
    assert sizes == [3, 5, 9, 15, 27]


@pytest.mark.parametrize("desc", features.gabor_bank(32), ids=lambda d: d.short)
def test_kernel_normalisation(desc):
    k = features.build_gabor_kernel(desc.params)
    assert k.shape[0] == k.shape[1] == desc.params.kernel_size
    assert abs(k.mean()) < 1e-12
    assert math.isclose(np.linalg.norm(k), 1.0, rel_tol=1e-12)
    # even phase: point symmetric
    assert np.allclose(k, k[::-1, ::-1])


def test_quarter_turn_rotates_kernel():
    for scale_params in features.gabor_bank(32)[::4]:
        p = scale_params.params
        k0 = features.build_gabor_kernel(p)
        k90 = features.build_gabor_kernel(features.GaborParams(p.wavelength, 90.0, p.sigma, p.gamma,
                                                               p.kernel_size))
        assert np.allclose(k90, k0.T, atol=1e-12)


def test_orientation_wraps_at_180():
    p = features.GaborParams(8.0, 200.0, 4.0, 0.5, 9)
    assert p.orientation == 20.0


def test_even_kernel_size_rejected():
    with pytest.raises(InvalidParamsError):
        features.GaborParams(8.0, 0.0, 4.0, 0.5, 8)


def _oracle_pool(arr, grid):
    n_r, n_c = arr.shape
    out = np.empty((grid, grid))
    for i in range(grid):
        for j in range(grid):
            r0, r1 = math.floor(i * n_r / grid), math.ceil((i + 1) * n_r / grid)
            c0, c1 = math.floor(j * n_c / grid), math.ceil((j + 1) * n_c / grid)
            out[i, j] = arr[r0:r1, c0:c1].mean()
    return out


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 40), st.integers(3, 40), st.integers(1, 3), st.integers(0, 2**31))
def test_grid_pool_matches_loops(n_r, n_c, grid, seed):
    arr = np.random.default_rng(seed).random((n_r, n_c))
    assert np.allclose(features.grid_pool(arr, grid), _oracle_pool(arr, grid), atol=1e-12)


def test_texture_feature_matches_brute_force():
    rng = np.random.default_rng(4)
    image = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
    params = features.GaborParams.from_wavelength(4.0, 45.0)
    k = features.build_gabor_kernel(params)
    n = k.shape[0]
    gray = image.astype(np.float64) / 255.0 @ np.array([0.299, 0.587, 0.114])
    out = 16 - n + 1
    resp = np.zeros((out, out))
    for i in range(out):
        for j in range(out):
            acc = 0.0
            for a in range(n):
                for b in range(n):
                    acc += gray[i + a, j + b] * k[n - 1 - a, n - 1 - b]
            resp[i, j] = abs(acc)
    expected = _oracle_pool(resp, 4).ravel() / k[k > 0].sum()
    got = features.extract_texture_feature(image, params, grid=4).values
    assert np.allclose(got, expected, atol=1e-12)


def test_color_feature_counts_member_pixels():
    image = np.zeros((16, 16, 3), dtype=np.uint8)
    image[:8, :8] = (255, 0, 0)
    fv = features.extract_color_feature(image, Color.RED, grid=2)
    assert fv.values.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert fv.dims == 4


def test_oriented_grating_prefers_matching_filter():
    n = 32
    y, x = np.mgrid[0:n, 0:n]
    wave = 0.5 + 0.5 * np.cos(2 * np.pi * x / 8.0)  # bars varying along x
    image = np.repeat((wave * 255).astype(np.uint8)[..., None], 3, axis=2)
    p0 = features.GaborParams.from_wavelength(8.0, 0.0)
    p90 = features.GaborParams.from_wavelength(8.0, 90.0)
    e0 = features.extract_texture_feature(image, p0, grid=4).values.mean()
    e90 = features.extract_texture_feature(image, p90, grid=4).values.mean()
    assert e0 > 5 * e90


def test_texture_features_bounded_by_one():
    rng = np.random.default_rng(0)
    image = rng.integers(0, 256, (32, 32, 3)).astype(np.uint8)
    for d in features.gabor_bank(32):
        v = features.extract_texture_feature(image, d.params).values
        assert (v >= 0).all() and (v <= 1 + 1e-12).all()


def test_kernel_larger_than_image_rejected():
    image = np.zeros((16, 16, 3), dtype=np.uint8)
    big = [d for d in features.gabor_bank(32) if d.params.kernel_size == 27][0]
    with pytest.raises(InvalidParamsError):
        features.extract_texture_feature(image, big.params, grid=4)


def test_grid_must_be_smaller_than_image():
    image = np.zeros((8, 8, 3), dtype=np.uint8)
    with pytest.raises(ShapeError):
        features.extract_color_feature(image, Color.RED, grid=9)
    with pytest.raises(ShapeError):
        features.extract_color_feature(image, Color.RED, grid=8)


def test_costs_on_32px():
    dims = (32, 32)
    red = features.ColorDescriptor(Color.RED)
    assert features.preprocessing_cost(red, dims) == 5 * 32 * 32 == 5120
    assert features.descriptor_marginal_cost(red, dims) == 2 * 32 * 32
    p7 = features.GaborParams(8.0, 0.0, 2.0, 0.5, 7)
    assert features.preprocessing_cost(features.TextureDescriptor(p7), dims) == 26 * 26 * 49 + 1024 == 34148
    bank_costs = sorted({features.preprocessing_cost(d, dims) for d in features.gabor_bank(32)})
    expected = sorted({(32 - k + 1) ** 2 * k * k + 1024 for k in (3, 5, 9, 15, 27)})
    assert bank_costs == expected == [9124, 20624, 27268, 47680, 73924]


def test_cost_constants_configurable():
    cfg = FeatureConfig(cost_hsv_convert=10, cost_bucket_test=2, cost_pool=0)
    assert features.preprocessing_cost(features.ColorDescriptor(Color.BLUE), (8, 8), cfg) == 12 * 64


def test_descriptor_round_trip():
    for d in features.color_space() + features.gabor_bank(32):
        assert features.descriptor_from_dict(d.to_dict()) == d


def test_short_names_are_unique():
    names = [d.short for d in features.color_space() + features.gabor_bank(32)]
    assert len(set(names)) == len(names)


def test_feature_config_from_kv():
    cfg = FeatureConfig.from_kv({"grid": "4", "white_s_max": "0.1"})
    assert cfg.grid == 4 and cfg.white_s_max == 0.1
