"""Builders for on-disk manifests driven by scripted segmenters."""

from pathlib import Path

import numpy as np

from cycleprompt.evaluation import PairManifestEntry, write_manifest
from cycleprompt.raster import save_mask, save_raster
from cycleprompt.segmenter import write_script_table


def mask_from_count(shape, n, offset=0):
    m = np.zeros(int(np.prod(shape)), bool)
    m[offset:offset + n] = True
    return m.reshape(shape)


def write_scripted_corpus(root: Path, pairs, shape=(10, 10)):
    """``pairs``: dicts with pair_id, polarity, m_f, p_f, m_r, p_r and (positives) gt.

    Support mask is the first 20 pixels; returns (manifest path, table path).
    """
    root = Path(root)
    img_dir = root / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    m_s = mask_from_count(shape, 20)
    entries, table = [], {}
    for p in pairs:
        pid = p["pair_id"]
        s_path, sm_path, q_path = (img_dir / f"{pid}_{k}.png" for k in ("s", "sm", "q"))
        save_raster(s_path, rng.integers(0, 256, shape, dtype=np.uint8))
        save_mask(sm_path, m_s)
        save_raster(q_path, rng.integers(0, 256, shape, dtype=np.uint8))
        gt_path = None
        if p["polarity"] == "positive":
            gt_path = img_dir / f"{pid}_gt.png"
            save_mask(gt_path, p["gt"])
        entries.append(PairManifestEntry(pid, s_path, sm_path, q_path, gt_path, p["polarity"]))
        table[(pid, "forward")] = (p["m_f"], p["p_f"])
        table[(pid, "reverse")] = (p.get("m_r", m_s), p["p_r"])
    manifest = root / "manifest.jsonl"
    write_manifest(manifest, entries)
    write_script_table(root / "table.jsonl", table)
    return manifest, root / "table.jsonl"
