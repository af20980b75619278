"""Deterministic synthetic inspection corpus.

Each pair has a noisy textured support image with one planted defect (a
random high-contrast pattern inside a blob) and a query image:

* positive: fresh background, the same defect pasted at a new spot under a
  global brightness change plus sensor noise; the ground truth is its blob;
* negative: fresh background carrying an unrelated defect (a different
  pattern and blob), so the prompt can latch onto something spurious.

Pair ``i`` is generated from a generator keyed on ``(seed, i)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cycleprompt.errors import DataIOError, ValidationError
from cycleprompt.evaluation import PairManifestEntry, write_manifest
from cycleprompt.raster import save_mask, save_raster

DEFAULT_SEED = 20240917


@dataclass(frozen=True)
class SynthSpec:
    n_positive: int = 30
    n_negative: int = 30
    size: int = 64
    defect_min: int = 7
    defect_max: int = 12
    # share of defect pattern cells redrawn in a positive query
    variation: tuple[float, float] = (0.05, 0.45)
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.n_positive < 0 or self.n_negative < 0:
            raise ValidationError("pair counts must be non-negative")
        if not 2 <= self.defect_min <= self.defect_max:
            raise ValidationError("need 2 <= defect_min <= defect_max")
        lo, hi = self.variation
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValidationError("variation must satisfy 0 <= lo <= hi <= 1")
        if self.size < 2 * self.defect_max:
            raise ValidationError(f"size must be at least {2 * self.defect_max}")


@dataclass(frozen=True, eq=False)
class Defect:
    shape: np.ndarray  # bool, h x w
    pattern: np.ndarray  # float offsets, h x w x 3


@dataclass(frozen=True, eq=False)
class SynthPair:
    pair_id: str
    polarity: str
    support_image: np.ndarray
    support_mask: np.ndarray
    query_image: np.ndarray
    gt_mask: np.ndarray | None


def _background(rng: np.random.Generator, size: int) -> np.ndarray:
    base = rng.uniform(90, 160)
    tint = rng.uniform(-6, 6, size=3)
    yy, xx = np.mgrid[0:size, 0:size] / size
    gx, gy = rng.uniform(-20, 20, size=2)
    light = base + gx * xx + gy * yy
    noise = rng.normal(0, 14, size=(size, size, 3))
    return light[..., None] + tint + noise


def _defect(rng: np.random.Generator, lo: int, hi: int) -> Defect:
    h, w = (int(v) for v in rng.integers(lo, hi + 1, size=2))
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2, (w - 1) / 2
    ry, rx = h / 2, w / 2
    r = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
    shape = r <= 1.0 + rng.uniform(-0.15, 0.15, size=(h, w))
    shape[int(cy), :] = True
    shape[:, int(cx)] = True
    return Defect(shape, _defect_pattern(rng, (h, w)))


def _defect_pattern(rng: np.random.Generator, hw: tuple[int, int]) -> np.ndarray:
    levels = rng.choice([-70.0, -35.0, 35.0, 70.0], size=hw)
    return np.repeat(levels[..., None], 3, axis=2) + rng.normal(0, 4, size=hw + (3,))


def _vary(rng: np.random.Generator, d: Defect, fraction: float) -> Defect:
    """Redraw ``fraction`` of the pattern cells: same defect type, new instance."""
    fresh = _defect_pattern(rng, d.shape.shape)
    redraw = rng.random(d.shape.shape) < fraction
    return Defect(d.shape, np.where(redraw[..., None], fresh, d.pattern))


def _paste(img: np.ndarray, d: Defect, y: int, x: int) -> np.ndarray:
    h, w = d.shape.shape
    out = img.copy()
    region = out[y:y + h, x:x + w]
    region[d.shape] += d.pattern[d.shape]
    return out


def _place(rng, size, d: Defect) -> tuple[int, int]:
    h, w = d.shape.shape
    return int(rng.integers(0, size - h + 1)), int(rng.integers(0, size - w + 1))


def _mask_at(size: int, d: Defect, y: int, x: int) -> np.ndarray:
    m = np.zeros((size, size), dtype=bool)
    h, w = d.shape.shape
    m[y:y + h, x:x + w] = d.shape
    return m


def _u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def make_pair(spec: SynthSpec, index: int) -> SynthPair:
    rng = np.random.default_rng([spec.seed, index])
    positive = index < spec.n_positive
    n = spec.size
    defect = _defect(rng, spec.defect_min, spec.defect_max)
    sy, sx = _place(rng, n, defect)
    support = _paste(_background(rng, n), defect, sy, sx)
    query = _background(rng, n)
    if positive:
        qy, qx = _place(rng, n, defect)
        variant = _vary(rng, defect, rng.uniform(*spec.variation))
        query = _paste(query, variant, qy, qx) * rng.uniform(0.85, 1.15)
        query = query + rng.normal(0, 8, size=query.shape)
        gt = _mask_at(n, defect, qy, qx)
    else:
        other = _defect(rng, spec.defect_min, spec.defect_max)
        qy, qx = _place(rng, n, other)
        query = _paste(query, other, qy, qx)
        gt = None
    kind = "pos" if positive else "neg"
    return SynthPair(
        pair_id=f"{kind}{index:04d}",
        polarity="positive" if positive else "negative",
        support_image=_u8(support),
        support_mask=_mask_at(n, defect, sy, sx),
        query_image=_u8(query),
        gt_mask=gt,
    )


def generate(spec: SynthSpec) -> list[SynthPair]:
    return [make_pair(spec, i) for i in range(spec.n_positive + spec.n_negative)]


def write_corpus(out_dir: str | Path, spec: SynthSpec = SynthSpec()) -> Path:
    """Write PNGs under ``out_dir/images`` and return the manifest path."""
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    try:
        img_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create output directory {out_dir}: {exc}") from exc
    entries = []
    for p in generate(spec):
        paths = {k: img_dir / f"{p.pair_id}_{k}.png" for k in ("support", "support_mask", "query", "gt")}
        save_raster(paths["support"], p.support_image)
        save_mask(paths["support_mask"], p.support_mask)
        save_raster(paths["query"], p.query_image)
        gt_path = None
        if p.gt_mask is not None:
            save_mask(paths["gt"], p.gt_mask)
            gt_path = paths["gt"]
        entries.append(PairManifestEntry(p.pair_id, paths["support"], paths["support_mask"],
                                         paths["query"], gt_path, p.polarity))
    manifest = out_dir / "manifest.jsonl"
    write_manifest(manifest, entries)
    return manifest
