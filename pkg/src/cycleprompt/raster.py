"""Images, binary masks and the pixel arithmetic used by the rest of the package.

Images are plain ``numpy.uint8`` arrays shaped ``(H, W)`` or ``(H, W, 3)``;
masks are ``bool`` arrays shaped ``(H, W)``. Every function here is pure and
returns new arrays.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from cycleprompt.errors import DataIOError, ShapeError, ValidationError

MIOU_MODES = ("foreground-only", "two-class-mean")


def check_raster(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r)
    if r.dtype != np.uint8:
        raise ValidationError(f"raster must be uint8, got {r.dtype}")
    if r.ndim == 3 and r.shape[2] == 1:
        r = r[:, :, 0]
    if not (r.ndim == 2 or (r.ndim == 3 and r.shape[2] == 3)):
        raise ValidationError(f"raster must be HxW or HxWx3, got shape {r.shape}")
    if r.shape[0] < 1 or r.shape[1] < 1:
        raise ValidationError(f"raster must be at least 1x1, got shape {r.shape}")
    return r


def check_mask(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValidationError(f"mask must be 2-D, got shape {m.shape}")
    if m.dtype != bool:
        m = m.astype(bool)
    return m


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.shape} vs {b.shape}")


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Foreground intersection over union; two empty masks score 1.0."""
    a, b = check_mask(a), check_mask(b)
    _same_shape(a, b)
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(a & b)) / union


def miou(a: np.ndarray, b: np.ndarray, mode: str = "foreground-only") -> float:
    """IoU of the foreground, or the mean of foreground and background IoU.

    ``two-class-mean`` averages ``iou(a, b)`` with ``iou(~a, ~b)``.
    """
    if mode == "foreground-only":
        return iou(a, b)
    if mode == "two-class-mean":
        a, b = check_mask(a), check_mask(b)
        return (iou(a, b) + iou(~a, ~b)) / 2
    raise ValidationError(f"unknown miou mode {mode!r}; expected one of {MIOU_MODES}")


def response_rate(m: np.ndarray) -> float:
    m = check_mask(m)
    return int(np.count_nonzero(m)) / m.size


def null_mask(height: int, width: int) -> np.ndarray:
    return np.zeros((height, width), dtype=bool)


def _nearest_index(src: int, dst: int) -> np.ndarray:
    return (np.arange(dst) * src) // dst


def _resize(x: np.ndarray, w: int, h: int) -> np.ndarray:
    if w < 1 or h < 1:
        raise ValidationError(f"target size must be positive, got {w}x{h}")
    rows = _nearest_index(x.shape[0], h)
    cols = _nearest_index(x.shape[1], w)
    return x[rows][:, cols].copy()


def resize_nearest(r: np.ndarray, w: int, h: int) -> np.ndarray:
    return _resize(check_raster(r), w, h)


def resize_nearest_mask(m: np.ndarray, w: int, h: int) -> np.ndarray:
    return _resize(check_mask(m), w, h)


def hflip(r: np.ndarray) -> np.ndarray:
    return check_raster(r)[:, ::-1].copy()


def hflip_mask(m: np.ndarray) -> np.ndarray:
    return check_mask(m)[:, ::-1].copy()


def to_gray(r: np.ndarray) -> np.ndarray:
    """Channel-averaged grayscale as float64 (no rounding)."""
    r = check_raster(r)
    if r.ndim == 2:
        return r.astype(np.float64)
    return r.astype(np.float64).mean(axis=2)


def bounding_box(m: np.ndarray) -> tuple[int, int, int, int] | None:
    """``(top, left, bottom, right)`` with exclusive bottom/right, or None if empty."""
    m = check_mask(m)
    rows = np.flatnonzero(m.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(m.any(axis=0))
    return int(rows[0]), int(cols[0]), int(rows[-1]) + 1, int(cols[-1]) + 1


# --- file I/O -------------------------------------------------------------

def load_raster(path: str | Path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB PNG/PGM/PPM."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                if im.mode in ("P", "LA", "RGBA", "1"):
                    im = im.convert("RGB" if im.mode in ("P", "RGBA") else "L")
                else:
                    raise ValidationError(f"{path}: unsupported image mode {im.mode}")
            return np.array(im, dtype=np.uint8)
    except FileNotFoundError as exc:
        raise DataIOError(f"missing image file: {path}") from exc
    except OSError as exc:
        raise DataIOError(f"cannot read image {path}: {exc}") from exc


def save_raster(path: str | Path, r: np.ndarray) -> None:
    """Write PNG, or binary PGM/PPM when the suffix is .pgm/.ppm."""
    r = check_raster(r)
    path = Path(path)
    try:
        Image.fromarray(np.ascontiguousarray(r)).save(path)
    except OSError as exc:
        raise DataIOError(f"cannot write image {path}: {exc}") from exc


def load_mask(path: str | Path) -> np.ndarray:
    """Samples >= 128 decode to foreground."""
    r = load_raster(path)
    if r.ndim == 3:
        raise ValidationError(f"{path}: mask files must be single-channel")
    return r >= 128


def save_mask(path: str | Path, m: np.ndarray) -> None:
    m = check_mask(m)
    save_raster(path, np.where(m, 255, 0).astype(np.uint8))
