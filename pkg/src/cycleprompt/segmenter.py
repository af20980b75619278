"""One-shot prompt segmenters.

A segmenter takes a prompt (support image + support mask) and a query image and
returns a mask over the query plus a top-1 score in [0, 1]. Two kinds ship with
the package:

``reference-ncc``
    Template matching with zero-normalized cross-correlation (ZNCC). The
    support-mask bounding box is the template; placements scoring at least
    ``relative_threshold * max`` are accepted and each paints the template's
    mask shape at that spot. Score is ``(max + 1) / 2``; the mask is empty when
    ``max < absolute_floor``. Stride 1, single scale.

``scripted``
    Replays a table of ``(pair_id, direction) -> (mask, score)``; used to drive
    the gate with exact, hand-chosen numbers.

``external`` is a reserved kind for integrations outside this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol

import numpy as np
import scipy.signal

from cycleprompt.errors import DataIOError, ShapeError, ValidationError
from cycleprompt.raster import bounding_box, check_mask, check_raster, load_mask, save_mask

KINDS = ("reference-ncc", "scripted", "external")
DIRECTIONS = ("forward", "reverse")

# direct integer correlation is exact; above this many multiply-adds use FFT
_DIRECT_LIMIT = 50_000_000


class SegmenterError(RuntimeError):
    pass


class MissingScriptError(SegmenterError):
    pass


class UnsupportedSegmenterError(SegmenterError):
    pass


@dataclass(frozen=True, eq=False)
class PromptQuery:
    support_image: np.ndarray
    support_mask: np.ndarray
    query_image: np.ndarray
    # identify the pair for table-driven segmenters; ignored by reference-ncc
    pair_id: str | None = None
    direction: str = "forward"

    def __post_init__(self):
        s = check_raster(self.support_image)
        m = check_mask(self.support_mask)
        q = check_raster(self.query_image)
        if s.shape[:2] != m.shape:
            raise ShapeError(f"support image {s.shape[:2]} and mask {m.shape} differ in size")
        if not m.any():
            raise ValidationError("support mask must contain at least one foreground pixel")
        if self.direction not in DIRECTIONS:
            raise ValidationError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        object.__setattr__(self, "support_image", s)
        object.__setattr__(self, "support_mask", m)
        object.__setattr__(self, "query_image", q)


@dataclass(frozen=True, eq=False)
class PromptResult:
    mask: np.ndarray
    score: float

    def __post_init__(self):
        object.__setattr__(self, "mask", check_mask(self.mask))
        score = float(self.score)
        if not 0.0 <= score <= 1.0:
            raise ValidationError(f"score must be in [0, 1], got {score}")
        object.__setattr__(self, "score", score)


class Segmenter(Protocol):
    def segment(self, q: PromptQuery) -> PromptResult: ...


@dataclass(frozen=True, eq=False)
class SegmenterSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"segmenter kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "params", dict(self.params))
        if self.kind == "reference-ncc":
            unknown = set(self.params) - {"relative_threshold", "absolute_floor"}
            if unknown:
                raise ValidationError(f"unknown reference-ncc parameters: {sorted(unknown)}")
            NCCSegmenter(**self.params)
        elif self.kind == "scripted":
            unknown = set(self.params) - {"table", "entries"}
            if unknown:
                raise ValidationError(f"unknown scripted parameters: {sorted(unknown)}")
            if ("table" in self.params) == ("entries" in self.params):
                raise ValidationError("scripted segmenter needs exactly one of 'table' or 'entries'")


# --- ZNCC -----------------------------------------------------------------

def _gray3(r: np.ndarray) -> np.ndarray:
    """Integer grayscale scaled by 3 so channel averaging stays exact."""
    r = check_raster(r)
    if r.ndim == 2:
        return r.astype(np.int64) * 3
    return r.astype(np.int64).sum(axis=2)


def _window_sums(x: np.ndarray, th: int, tw: int) -> np.ndarray:
    c = np.zeros((x.shape[0] + 1, x.shape[1] + 1), dtype=x.dtype)
    c[1:, 1:] = x.cumsum(axis=0).cumsum(axis=1)
    return c[th:, tw:] - c[:-th, tw:] - c[th:, :-tw] + c[:-th, :-tw]


def _zncc(template: np.ndarray, query: np.ndarray) -> np.ndarray:
    th, tw = template.shape
    qh, qw = query.shape
    if th > qh or tw > qw:
        raise ShapeError(f"patch {template.shape} does not fit inside query {query.shape}")
    n = th * tw
    t_sum = int(template.sum())
    t_var = n * int((template * template).sum()) - t_sum * t_sum

    q_sum = _window_sums(query, th, tw)
    q_sq = _window_sums(query * query, th, tw)
    q_var = n * q_sq - q_sum * q_sum

    work = (qh - th + 1) * (qw - tw + 1) * n
    if work <= _DIRECT_LIMIT:
        cross = scipy.signal.correlate(query, template, mode="valid", method="direct")
        num = (n * cross - q_sum * t_sum).astype(np.float64)
    else:
        cross = scipy.signal.correlate(
            query.astype(np.float64), template.astype(np.float64), mode="valid", method="fft"
        )
        num = n * cross - q_sum.astype(np.float64) * t_sum

    out = np.zeros(q_sum.shape, dtype=np.float64)
    if t_var <= 0:
        return out
    ok = q_var > 0
    denom = np.sqrt(q_var[ok].astype(np.float64)) * np.sqrt(float(t_var))
    out[ok] = num[ok] / denom
    return np.clip(out, -1.0, 1.0)


def ncc_response_map(support_patch: np.ndarray, query: np.ndarray) -> np.ndarray:
    """ZNCC of ``support_patch`` at every placement fully inside ``query``.

    Output shape is ``(Hq - Hp + 1, Wq - Wp + 1)``; entry ``[y, x]`` scores the
    patch with its top-left corner at ``(y, x)``. Zero-variance patch or window
    gives 0 there. Color inputs are channel-averaged first.
    """
    return _zncc(_gray3(support_patch), _gray3(query))


@dataclass(frozen=True)
class NCCSegmenter:
    relative_threshold: float = 0.8
    absolute_floor: float = 0.2

    def __post_init__(self):
        if not 0.0 < float(self.relative_threshold) <= 1.0:
            raise ValidationError(
                f"relative_threshold must be in (0, 1], got {self.relative_threshold}"
            )
        if not -1.0 <= float(self.absolute_floor) <= 1.0:
            raise ValidationError(f"absolute_floor must be in [-1, 1], got {self.absolute_floor}")

    def segment(self, q: PromptQuery) -> PromptResult:
        qh, qw = q.query_image.shape[:2]
        top, left, bottom, right = bounding_box(q.support_mask)
        template = _gray3(q.support_image)[top:bottom, left:right]
        shape = q.support_mask[top:bottom, left:right]
        th, tw = shape.shape
        if th > qh or tw > qw:
            # prompt region cannot be placed anywhere in the query
            return PromptResult(np.zeros((qh, qw), dtype=bool), 0.0)

        resp = _zncc(template, _gray3(q.query_image))
        best = float(resp.max())
        score = (best + 1.0) / 2.0
        if best < self.absolute_floor:
            return PromptResult(np.zeros((qh, qw), dtype=bool), score)
        cut = self.relative_threshold * best if best > 0 else best
        accepted = (resp >= cut).astype(np.int64)
        painted = scipy.signal.convolve2d(accepted, shape.astype(np.int64), mode="full")
        return PromptResult(painted > 0, score)


# --- scripted -------------------------------------------------------------

class ScriptedSegmenter:
    """Looks up ``(pair_id, direction)`` in a fixed table."""

    def __init__(self, entries: Mapping[tuple[str, str], tuple[np.ndarray, float]]):
        self._entries = {
            (str(pid), d): PromptResult(mask, score) for (pid, d), (mask, score) in entries.items()
        }
        for _, d in self._entries:
            if d not in DIRECTIONS:
                raise ValidationError(f"direction must be one of {DIRECTIONS}, got {d!r}")

    @property
    def entries(self) -> dict[tuple[str, str], PromptResult]:
        return dict(self._entries)

    def segment(self, q: PromptQuery) -> PromptResult:
        key = (q.pair_id, q.direction)
        if key not in self._entries:
            raise MissingScriptError(f"no scripted {q.direction} entry for pair {q.pair_id!r}")
        res = self._entries[key]
        if res.mask.shape != q.query_image.shape[:2]:
            raise ShapeError(
                f"scripted mask {res.mask.shape} for pair {q.pair_id!r} does not match "
                f"query image {q.query_image.shape[:2]}"
            )
        return PromptResult(res.mask.copy(), res.score)


def load_script_table(path: str | Path) -> dict[tuple[str, str], tuple[np.ndarray, float]]:
    """Read a JSON Lines table; ``mask_path`` is relative to the table's directory."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError as exc:
        raise DataIOError(f"missing script table: {path}") from exc
    entries = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            key = (str(rec["pair_id"]), rec["direction"])
            mask_path = path.parent / rec["mask_path"]
            score = float(rec["score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad script record ({exc})") from exc
        if key in entries:
            raise ValidationError(f"{path}:{lineno}: duplicate entry {key}")
        entries[key] = (load_mask(mask_path), score)
    return entries


def write_script_table(
    path: str | Path, entries: Mapping[tuple[str, str], tuple[np.ndarray, float]]
) -> None:
    """Write masks next to the table as ``<pair_id>.<direction>.png``."""
    path = Path(path)
    mask_dir = path.parent / (path.stem + "_masks")
    mask_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for (pid, direction), (mask, score) in entries.items():
        name = f"{pid}.{direction}.png"
        save_mask(mask_dir / name, mask)
        lines.append(json.dumps({
            "pair_id": pid,
            "direction": direction,
            "mask_path": f"{mask_dir.name}/{name}",
            "score": float(score),
        }))
    path.write_text("".join(line + "\n" for line in lines))


# --- dispatch -------------------------------------------------------------

class _External:
    def segment(self, q: PromptQuery) -> PromptResult:
        raise UnsupportedSegmenterError(
            "segmenter kind 'external' is reserved for integrations and cannot run in core"
        )


def build_segmenter(spec: SegmenterSpec) -> Segmenter:
    if spec.kind == "reference-ncc":
        return NCCSegmenter(**spec.params)
    if spec.kind == "scripted":
        if "entries" in spec.params:
            return ScriptedSegmenter(spec.params["entries"])
        return ScriptedSegmenter(load_script_table(spec.params["table"]))
    return _External()


def segment(seg: SegmenterSpec | Segmenter, q: PromptQuery) -> PromptResult:
    if isinstance(seg, SegmenterSpec):
        seg = build_segmenter(seg)
    res = seg.segment(q)
    if res.mask.shape != q.query_image.shape[:2]:
        raise ShapeError(
            f"segmenter returned mask {res.mask.shape} for query {q.query_image.shape[:2]}"
        )
    return res
