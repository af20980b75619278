from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cycleprompt.augment import (
    FACTOR_SCALE,
    quantize_factor,
    AugmentPolicy,
    adjust_brightness,
    adjust_contrast,
    adjust_saturation,
    apply_policy,
    draw,
)
from cycleprompt.errors import ShapeError, ValidationError
from cycleprompt.raster import hflip, hflip_mask
from cycleprompt.selfcheck import round_half_away


def clamp(v):
    return min(255, max(0, v))


def contrast_oracle(samples, factor):
    f = Fraction(quantize_factor(factor), FACTOR_SCALE)
    flat = [int(s) for s in np.asarray(samples).ravel()]
    mu = Fraction(sum(flat), len(flat))
    return [clamp(round_half_away(mu + (s - mu) * f)) for s in flat]


def saturation_oracle(pixel, factor):
    f = Fraction(quantize_factor(factor), FACTOR_SCALE)
    g = round_half_away(Fraction(sum(pixel), 3))
    return [clamp(round_half_away(g + (c - g) * f)) for c in pixel]


def test_brightness_examples():
    r = np.array([[200, 250, 100]], np.uint8)
    assert adjust_brightness(r, 1.2).tolist()[0][:2] == [240, 255]
    assert adjust_brightness(r, 0.8).tolist()[0][2] == 80
    assert np.array_equal(adjust_brightness(r, 1.0), r)


def test_contrast_examples():
    r = np.array([[100, 200]], np.uint8)
    assert adjust_contrast(r, 1.2).tolist() == [[90, 210]]
    const = np.full((3, 4, 3), 77, np.uint8)
    assert np.array_equal(adjust_contrast(const, 1.2), const)
    assert np.array_equal(adjust_contrast(r, 1.0), r)


def test_saturation_examples():
    px = np.array([[[120, 60, 90]]], np.uint8)
    assert adjust_saturation(px, 1.2).tolist() == [[[126, 54, 90]]]
    gray = adjust_saturation(px, 0.0)
    assert gray.tolist() == [[[90, 90, 90]]]
    assert np.array_equal(adjust_saturation(px, 1.0), px)
    single = np.array([[1, 2]], np.uint8)
    assert np.array_equal(adjust_saturation(single, 1.2), single)


@pytest.mark.parametrize("op", [adjust_brightness, adjust_contrast])
@pytest.mark.parametrize("factor", [0.0, -1.0])
def test_non_positive_factor_rejected(op, factor):
    with pytest.raises(ValidationError):
        op(np.zeros((2, 2), np.uint8), factor)


factors = st.one_of(st.sampled_from([0.8, 0.9, 1.1, 1.2]),
                    st.floats(0.05, 3.0, allow_nan=False))


def test_quantized_factors_are_decimal_exact():
    assert Fraction(quantize_factor(0.8), FACTOR_SCALE) == Fraction(4, 5)
    assert Fraction(quantize_factor(1.1), FACTOR_SCALE) == Fraction(11, 10)


def test_contrast_half_tie_rounds_away():
    # mean 147, 147 - 105 * 1.1 = 31.5 exactly
    r = np.array([[42, 252]], np.uint8)
    assert adjust_contrast(r, 1.1).tolist() == [[32, 255]]


@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6))), factors)
def test_contrast_matches_exact_oracle(r, factor):
    assert adjust_contrast(r, factor).ravel().tolist() == contrast_oracle(r, factor)


@given(st.tuples(*[st.integers(0, 255)] * 3), factors)
def test_saturation_matches_exact_oracle(pixel, factor):
    px = np.array([[pixel]], np.uint8)
    assert adjust_saturation(px, factor).ravel().tolist() == saturation_oracle(pixel, factor)


def test_policy_validation():
    with pytest.raises(ValidationError):
        AugmentPolicy(brightness_range=(1.2, 0.8))
    with pytest.raises(ValidationError):
        AugmentPolicy(contrast_range=(0.0, 1.0))
    with pytest.raises(ValidationError):
        AugmentPolicy(hflip_probability=1.5)


def test_default_policy_values():
    p = AugmentPolicy()
    assert p.brightness_range == p.contrast_range == p.saturation_range == (0.8, 1.2)
    assert p.hflip_probability == 0.5


def _sample(seed=0):
    rng = np.random.default_rng(seed)
    r = rng.integers(0, 256, (6, 8, 3), dtype=np.uint8)
    m = rng.random((6, 8)) < 0.3
    return r, m


@given(st.integers(0, 2**63), st.integers(0, 10_000))
def test_identity_policy(seed, idx):
    r, m = _sample()
    r2, m2 = apply_policy(r, m, AugmentPolicy.identity(seed), idx)
    assert np.array_equal(r2, r) and np.array_equal(m2, m)


def test_forced_flip():
    r, m = _sample()
    policy = AugmentPolicy((1, 1), (1, 1), (1, 1), 1.0, seed=3)
    r2, m2 = apply_policy(r, m, policy, 0)
    assert np.array_equal(r2, hflip(r)) and np.array_equal(m2, hflip_mask(m))


@given(st.integers(0, 2**63), st.integers(0, 10_000))
def test_apply_policy_deterministic(seed, idx):
    r, m = _sample(1)
    p = AugmentPolicy(seed=seed)
    a = apply_policy(r, m, p, idx)
    b = apply_policy(r, m, p, idx)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@given(st.integers(0, 2**32), st.integers(0, 1000))
def test_mask_only_moves_with_flip(seed, idx):
    r, m = _sample(2)
    p = AugmentPolicy(seed=seed)
    _, m2 = apply_policy(r, m, p, idx)
    want = hflip_mask(m) if draw(p, idx).flip else m
    assert np.array_equal(m2, want)


def test_draws_within_ranges_and_flip_rate():
    p = AugmentPolicy(seed=11)
    draws = [draw(p, i) for i in range(2000)]
    for d in draws:
        assert 0.8 <= d.brightness <= 1.2
        assert 0.8 <= d.contrast <= 1.2
        assert 0.8 <= d.saturation <= 1.2
    assert 0.45 < np.mean([d.flip for d in draws]) < 0.55


def test_apply_policy_shape_mismatch():
    with pytest.raises(ShapeError):
        apply_policy(np.zeros((3, 3), np.uint8), np.zeros((3, 4), bool), AugmentPolicy(), 0)


@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6))), factors)
def test_brightness_matches_exact_oracle(r, factor):
    f = Fraction(quantize_factor(factor), FACTOR_SCALE)
    want = [clamp(round_half_away(int(s) * f)) for s in r.ravel()]
    assert adjust_brightness(r, factor).ravel().tolist() == want
