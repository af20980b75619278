import hashlib

import numpy as np

from cycleprompt.evaluation import EvalConfig, evaluate, load_manifest
from cycleprompt.gate import GateConfig
from cycleprompt.raster import bounding_box
from cycleprompt.segmenter import SegmenterSpec
from cycleprompt.synth import SynthSpec, generate, make_pair, write_corpus


def digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_counts(small_corpus):
    entries = load_manifest(small_corpus)
    assert len(entries) == 20
    assert sum(e.gt_mask_path is not None for e in entries) == 10


def test_same_seed_same_bytes(tmp_path):
    spec = SynthSpec(n_positive=3, n_negative=3, seed=7)
    write_corpus(tmp_path / "a", spec)
    write_corpus(tmp_path / "b", spec)
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    write_corpus(tmp_path / "c", SynthSpec(n_positive=3, n_negative=3, seed=8))
    assert digest(tmp_path / "a") != digest(tmp_path / "c")


def test_pairs_are_well_formed():
    for p in generate(SynthSpec(n_positive=4, n_negative=4, seed=1)):
        assert p.support_image.dtype == np.uint8 and p.support_image.shape == (64, 64, 3)
        assert p.support_mask.any()
        if p.polarity == "positive":
            assert p.gt_mask.sum() == p.support_mask.sum()
        else:
            assert p.gt_mask is None


def test_pair_generation_is_per_index():
    spec = SynthSpec(seed=11)
    a = make_pair(spec, 5)
    b = generate(spec)[5]
    assert np.array_equal(a.query_image, b.query_image)
    top, left, bottom, right = bounding_box(a.support_mask)
    assert bottom - top <= spec.defect_max and right - left <= spec.defect_max


def test_reference_gate_on_seed7_corpus(small_corpus):
    cfg = EvalConfig(GateConfig.single(SegmenterSpec("reference-ncc"), 0.18))
    rep = evaluate(small_corpus, cfg)
    assert rep.yield_rate >= 0.9
    assert rep.catch_rate >= 0.8
