"""Forward/reverse prompting, cycle confidence and threshold gating.

For one support/query pair a stage runs

    forward:  (support, m_s) prompts the query    -> (m_f, p_f)
    reverse:  (query, m_f) prompts the support    -> (m_r, p_r)
    p_c = p_f * p_r * miou(m_s, m_r)

and accepts ``m_f`` when ``p_c >= threshold``. Stages form a cascade: a later
stage only runs when every earlier stage rejected. If all reject, the pair gets
a null mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from cycleprompt.errors import ShapeError, ValidationError
from cycleprompt.raster import MIOU_MODES, check_mask, miou, null_mask
from cycleprompt.segmenter import (
    PromptQuery,
    Segmenter,
    SegmenterError,
    SegmenterSpec,
    build_segmenter,
    segment,
)

DEFAULT_THRESHOLDS = (0.18, 0.015)


class GateError(RuntimeError):
    """A segmenter failed while gating a pair; carries the pair and stage."""

    def __init__(self, pair_id, stage_index: int, cause: BaseException):
        super().__init__(f"pair {pair_id!r} stage {stage_index}: {cause}")
        self.pair_id = pair_id
        self.stage_index = stage_index
        self.cause = cause


@dataclass(frozen=True, eq=False)
class Stage:
    segmenter: SegmenterSpec
    threshold: float

    def __post_init__(self):
        t = float(self.threshold)
        if not 0.0 <= t <= 1.0:
            raise ValidationError(f"stage threshold must be in [0, 1], got {t}")
        object.__setattr__(self, "threshold", t)


@dataclass(frozen=True, eq=False)
class GateConfig:
    stages: tuple[Stage, ...]
    miou_mode: str = "foreground-only"

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ValidationError("gate needs at least one stage")
        if self.miou_mode not in MIOU_MODES:
            raise ValidationError(f"miou_mode must be one of {MIOU_MODES}, got {self.miou_mode!r}")

    @classmethod
    def single(cls, seg: SegmenterSpec, threshold: float = DEFAULT_THRESHOLDS[0], **kw):
        return cls((Stage(seg, threshold),), **kw)

    @classmethod
    def cascade(cls, primary: SegmenterSpec, fallback: SegmenterSpec,
                thresholds: Sequence[float] = DEFAULT_THRESHOLDS, **kw):
        """Two-stage setup: primary model at 0.18, fallback model at 0.015."""
        return cls((Stage(primary, thresholds[0]), Stage(fallback, thresholds[1])), **kw)

    def with_threshold(self, tau: float, stage_index: int = 1) -> "GateConfig":
        stages = list(self.stages)
        stages[stage_index - 1] = Stage(stages[stage_index - 1].segmenter, tau)
        new = replace(self, stages=tuple(stages))
        # built segmenters do not depend on thresholds
        if "segmenters" in self.__dict__:
            new.__dict__["segmenters"] = self.segmenters
        return new

    @cached_property
    def segmenters(self) -> tuple[Segmenter, ...]:
        return tuple(build_segmenter(s.segmenter) for s in self.stages)


@dataclass(frozen=True, eq=False)
class CycleTrace:
    """Threshold-independent outcome of one forward/reverse cycle."""

    forward_mask: np.ndarray
    forward_score: float
    reverse_mask: np.ndarray
    reverse_score: float
    miou_value: float
    confidence: float


@dataclass(frozen=True, eq=False)
class CycleRecord:
    pair_id: str | None
    stage_index: int
    forward_mask: np.ndarray
    forward_score: float
    reverse_mask: np.ndarray
    reverse_score: float
    miou_value: float
    confidence: float
    decision: str
    final_mask: np.ndarray
    threshold: float
    stage_confidences: tuple[float, ...] = field(default=())

    @property
    def accepted(self) -> bool:
        return self.decision == "accepted"

    def to_dict(self, mask_refs: dict | None = None) -> dict:
        """Scalar fields plus foreground counts and optional mask file references."""
        out = {
            "pair_id": self.pair_id,
            "stage_index": self.stage_index,
            "threshold": self.threshold,
            "forward_score": self.forward_score,
            "reverse_score": self.reverse_score,
            "miou": self.miou_value,
            "confidence": self.confidence,
            "decision": self.decision,
            "stage_confidences": list(self.stage_confidences),
            "forward_pixels": int(self.forward_mask.sum()),
            "reverse_pixels": int(self.reverse_mask.sum()),
            "final_pixels": int(self.final_mask.sum()),
        }
        if mask_refs:
            out["masks"] = dict(mask_refs)
        return out


def forward_phase(seg, support_image, m_s, query_image, pair_id=None) -> tuple[np.ndarray, float]:
    res = segment(seg, PromptQuery(support_image, m_s, query_image, pair_id, "forward"))
    return res.mask, res.score


def reverse_phase(seg, query_image, m_f, support_image, pair_id=None) -> tuple[np.ndarray, float]:
    """Prompt the original support image with ``(query_image, m_f)``.

    An empty ``m_f`` cannot serve as a prompt; the result is then a null mask
    with score 0, which forces ``p_c = 0``.
    """
    m_f = check_mask(m_f)
    if not m_f.any():
        h, w = np.asarray(support_image).shape[:2]
        return null_mask(h, w), 0.0
    res = segment(seg, PromptQuery(query_image, m_f, support_image, pair_id, "reverse"))
    return res.mask, res.score


def confidence(p_f: float, p_r: float, m_s, m_r, mode: str = "foreground-only") -> float:
    for name, p in (("p_f", p_f), ("p_r", p_r)):
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"{name} must be in [0, 1], got {p}")
    return float(p_f) * float(p_r) * miou(m_s, m_r, mode)


def run_cycle(seg, support_image, m_s, query_image, pair_id=None,
              miou_mode: str = "foreground-only") -> CycleTrace:
    m_f, p_f = forward_phase(seg, support_image, m_s, query_image, pair_id)
    m_r, p_r = reverse_phase(seg, query_image, m_f, support_image, pair_id)
    if m_r.shape != np.asarray(m_s).shape:
        raise ShapeError(f"reverse mask {m_r.shape} does not cover the support {np.shape(m_s)}")
    m = miou(m_s, m_r, miou_mode)
    return CycleTrace(m_f, p_f, m_r, p_r, m, p_f * p_r * m)


def gate(config: GateConfig, support_image, m_s, query_image, pair_id=None,
         cache: dict | None = None) -> CycleRecord:
    """Walk the cascade until a stage accepts.

    ``cache`` maps stage index -> CycleTrace for this pair. Traces do not depend
    on thresholds, so a caller sweeping thresholds can pass the same dict each
    time and only new stages get computed.
    """
    confidences = []
    for i, (stage, seg) in enumerate(zip(config.stages, config.segmenters), start=1):
        trace = None if cache is None else cache.get(i)
        if trace is None:
            try:
                trace = run_cycle(seg, support_image, m_s, query_image, pair_id, config.miou_mode)
            except (SegmenterError, ValidationError) as exc:
                raise GateError(pair_id, i, exc) from exc
            if cache is not None:
                cache[i] = trace
        confidences.append(trace.confidence)
        accepted = trace.confidence >= stage.threshold
        if accepted or i == len(config.stages):
            final = trace.forward_mask.copy() if accepted else np.zeros_like(trace.forward_mask)
            return CycleRecord(
                pair_id=pair_id,
                stage_index=i,
                forward_mask=trace.forward_mask,
                forward_score=trace.forward_score,
                reverse_mask=trace.reverse_mask,
                reverse_score=trace.reverse_score,
                miou_value=trace.miou_value,
                confidence=trace.confidence,
                decision="accepted" if accepted else "rejected",
                final_mask=final,
                threshold=stage.threshold,
                stage_confidences=tuple(confidences),
            )
    raise AssertionError("unreachable")
