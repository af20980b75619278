"""Photometric + horizontal-flip augmentation with reproducible draws.

Randomness for draw ``i`` under seed ``s`` comes from a generator keyed on
``(s, i)``, so any single draw can be regenerated without replaying the others.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cycleprompt.errors import ShapeError, ValidationError
from cycleprompt.raster import check_mask, check_raster, hflip, hflip_mask


# Factors are quantized to multiples of 1e-6 and all arithmetic is done on
# integers, so ties round the same way on every platform.
FACTOR_SCALE = 1_000_000


def quantize_factor(factor: float) -> int:
    """Factor as an integer count of 1e-6 steps."""
    return int(round(float(factor) * FACTOR_SCALE))


def _div_round_half_away(num: np.ndarray, den: int | np.ndarray) -> np.ndarray:
    """``round(num / den)`` with ties away from zero; ``den > 0``, exact on int64."""
    mag = (2 * np.abs(num) + den) // (2 * den)
    return np.where(num < 0, -mag, mag)


def _to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0, 255).astype(np.uint8)


def _check_factor(factor: float) -> int:
    q = quantize_factor(factor)
    if not q > 0:
        raise ValidationError(f"factor must be positive, got {factor}")
    return q


def adjust_brightness(r: np.ndarray, factor: float) -> np.ndarray:
    """``s -> clamp(round(s * factor))``."""
    r = check_raster(r)
    q = _check_factor(factor)
    if q == FACTOR_SCALE:
        return r.copy()
    return _to_uint8(_div_round_half_away(r.astype(np.int64) * q, FACTOR_SCALE))


def adjust_contrast(r: np.ndarray, factor: float) -> np.ndarray:
    """Scale deviations from the image's mean gray level (all channels pooled)."""
    r = check_raster(r)
    q = _check_factor(factor)
    if q == FACTOR_SCALE:
        return r.copy()
    x = r.astype(np.int64)
    n, total = x.size, int(x.sum())
    if 4 * 255 * n * max(q, FACTOR_SCALE) >= 2**63:
        raise ValidationError(f"image of {n} samples too large for contrast factor {factor}")
    # mu + (s - mu) * f  ==  (total * SCALE + (s * n - total) * q) / (n * SCALE)
    num = total * FACTOR_SCALE + (x * n - total) * q
    return _to_uint8(_div_round_half_away(num, n * FACTOR_SCALE))


def adjust_saturation(r: np.ndarray, factor: float) -> np.ndarray:
    """Push each channel away from (or toward) the pixel's rounded channel mean.

    Single-channel rasters are returned unchanged. ``factor=0`` is accepted here
    (full desaturation) even though policies only draw positive factors.
    """
    r = check_raster(r)
    q = quantize_factor(factor)
    if q < 0:
        raise ValidationError(f"saturation factor must be >= 0, got {factor}")
    if r.ndim == 2 or q == FACTOR_SCALE:
        return r.copy()
    x = r.astype(np.int64)
    gray = _div_round_half_away(x.sum(axis=2, keepdims=True), 3)
    num = gray * FACTOR_SCALE + (x - gray) * q
    return _to_uint8(_div_round_half_away(num, FACTOR_SCALE))


def _check_range(name: str, rng: tuple[float, float]) -> tuple[float, float]:
    lo, hi = (float(v) for v in rng)
    if not 0 < lo <= hi:
        raise ValidationError(f"{name} must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class AugmentPolicy:
    brightness_range: tuple[float, float] = (0.8, 1.2)
    contrast_range: tuple[float, float] = (0.8, 1.2)
    saturation_range: tuple[float, float] = (0.8, 1.2)
    hflip_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("brightness_range", "contrast_range", "saturation_range"):
            object.__setattr__(self, name, _check_range(name, getattr(self, name)))
        if not 0.0 <= self.hflip_probability <= 1.0:
            raise ValidationError(
                f"hflip_probability must be in [0, 1], got {self.hflip_probability}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentPolicy":
        return cls((1.0, 1.0), (1.0, 1.0), (1.0, 1.0), 0.0, seed)


@dataclass(frozen=True)
class Draw:
    brightness: float
    contrast: float
    saturation: float
    flip: bool


def draw(policy: AugmentPolicy, draw_index: int) -> Draw:
    if draw_index < 0:
        raise ValidationError(f"draw_index must be >= 0, got {draw_index}")
    rng = np.random.default_rng([int(policy.seed), int(draw_index)])
    u = rng.random(4)

    def pick(lo_hi, t):
        lo, hi = lo_hi
        return lo + (hi - lo) * t if hi > lo else lo

    return Draw(
        brightness=pick(policy.brightness_range, u[0]),
        contrast=pick(policy.contrast_range, u[1]),
        saturation=pick(policy.saturation_range, u[2]),
        flip=bool(u[3] < policy.hflip_probability),
    )


def apply_policy(
    r: np.ndarray, m: np.ndarray, policy: AugmentPolicy, draw_index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Augment an image and its mask; photometric changes touch the image only."""
    r, m = check_raster(r), check_mask(m)
    if r.shape[:2] != m.shape:
        raise ShapeError(f"image {r.shape[:2]} and mask {m.shape} differ in size")
    d = draw(policy, draw_index)
    out = adjust_brightness(r, d.brightness)
    out = adjust_contrast(out, d.contrast)
    out = adjust_saturation(out, d.saturation)
    mask = m.copy()
    if d.flip:
        out, mask = hflip(out), hflip_mask(mask)
    return out, mask
