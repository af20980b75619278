"""Quick invariant checks over the built-in components, for ``cycleprompt selfcheck``.

Each check returns ``(name, ok, detail)``. The pytest suite runs the same
properties at larger sample counts.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from cycleprompt.augment import (
    FACTOR_SCALE,
    adjust_brightness,
    adjust_contrast,
    adjust_saturation,
    quantize_factor,
)
from cycleprompt.gate import GateConfig, gate
from cycleprompt.raster import iou, miou, response_rate
from cycleprompt.segmenter import SegmenterSpec
from cycleprompt.synth import SynthSpec, make_pair


def naive_counts(a, b):
    inter = union = 0
    for x, y in zip(np.asarray(a).ravel().tolist(), np.asarray(b).ravel().tolist()):
        inter += x and y
        union += x or y
    return inter, union


def naive_iou(a, b) -> float:
    inter, union = naive_counts(a, b)
    return 1.0 if union == 0 else inter / union


def round_half_away(x: Fraction) -> int:
    sign = -1 if x < 0 else 1
    n = abs(x)
    whole = n.numerator // n.denominator
    return sign * (whole + (1 if n - whole >= Fraction(1, 2) else 0))


def check_iou(rng: np.random.Generator, n: int = 300):
    for _ in range(n):
        h, w = rng.integers(1, 17, size=2)
        a = rng.random((h, w)) < rng.random()
        b = rng.random((h, w)) < rng.random()
        if iou(a, b) != naive_iou(a, b) or miou(a, b) != iou(a, b):
            return "iou matches pixel-count oracle", False, f"mismatch at shape {(h, w)}"
        if response_rate(a) != int(a.sum()) / a.size:
            return "iou matches pixel-count oracle", False, "response_rate mismatch"
    return "iou matches pixel-count oracle", True, f"{n} cases"


def check_gate(rng: np.random.Generator, n: int = 300):
    name = "gate invariants (scripted)"
    for k in range(n):
        h, w = rng.integers(2, 9, size=2)
        m_s = rng.random((h, w)) < 0.5
        m_s[0, 0] = True
        m_f = rng.random((h, w)) < 0.5
        m_r = rng.random((h, w)) < 0.5
        p_f, p_r, tau = rng.random(3)
        entries = {("p", "forward"): (m_f, p_f), ("p", "reverse"): (m_r, p_r)}
        cfg = GateConfig.single(SegmenterSpec("scripted", {"entries": entries}), tau)
        img = np.zeros((h, w), dtype=np.uint8)
        rec = gate(cfg, img, m_s, img, pair_id="p")
        bound = min(rec.forward_score, rec.reverse_score, rec.miou_value)
        if rec.confidence > bound:
            return name, False, f"p_c exceeds min factor in case {k}"
        if rec.accepted != (rec.confidence >= tau):
            return name, False, f"decision disagrees with threshold in case {k}"
        if not rec.accepted and rec.final_mask.any():
            return name, False, f"rejected pair kept a mask in case {k}"
    return name, True, f"{n} cases"


def check_self_match(n: int = 5):
    name = "reference-ncc self-match cycle"
    cfg = GateConfig.single(SegmenterSpec("reference-ncc"), 0.18)
    worst = 1.0
    for i in range(n):
        p = make_pair(SynthSpec(seed=1), i)
        rec = gate(cfg, p.support_image, p.support_mask, p.support_image)
        worst = min(worst, rec.confidence)
        if iou(rec.reverse_mask, p.support_mask) < 0.99 or rec.confidence < 0.95:
            return name, False, f"support {i}: p_c={rec.confidence:.4f}"
    return name, True, f"min p_c {worst:.4f}"


def check_clamp():
    name = "augmentation clamp sweep"
    for f in (0.8, 1.0, 1.2):
        v = np.arange(256, dtype=np.uint8).reshape(16, 16)
        got = adjust_brightness(v, f)
        want = [min(255, max(0, round_half_away(s * Fraction(quantize_factor(f), FACTOR_SCALE)))) for s in range(256)]
        if got.ravel().tolist() != want:
            return name, False, f"brightness factor {f}"
        if f == 1.0 and not (np.array_equal(adjust_contrast(v, f), v)
                             and np.array_equal(adjust_saturation(v, f), v)):
            return name, False, "factor 1.0 is not the identity"
    return name, True, "256 samples x 3 factors"


def run_all(seed: int = 0):
    rng = np.random.default_rng(seed)
    return [check_iou(rng), check_gate(rng), check_self_match(), check_clamp()]
