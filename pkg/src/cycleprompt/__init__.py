"""Cycle-consistency confidence gating for one-shot visual-prompting segmentation."""

from cycleprompt.raster import (
    iou,
    miou,
    response_rate,
    hflip,
    hflip_mask,
    resize_nearest,
    resize_nearest_mask,
    load_raster,
    save_raster,
    load_mask,
    save_mask,
)
from cycleprompt.augment import AugmentPolicy, apply_policy
from cycleprompt.segmenter import (
    PromptQuery,
    PromptResult,
    SegmenterSpec,
    build_segmenter,
    segment,
    ncc_response_map,
)
from cycleprompt.gate import (
    CycleRecord,
    GateConfig,
    Stage,
    confidence,
    forward_phase,
    reverse_phase,
    gate,
)
from cycleprompt.evaluation import (
    EvalConfig,
    EvalReport,
    PairManifestEntry,
    evaluate,
    load_manifest,
    score_pair,
    sweep_thresholds,
)

__version__ = "0.1.0"
