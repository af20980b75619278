"""Threshold sweep on the synthetic corpus, single stage vs two-stage cascade.

    python scripts/synthetic_sweep.py [--seed N] [--out DIR] [--workers N]

Writes the corpus under OUT/corpus and prints one table per gate setup.
"""

import argparse
from pathlib import Path

from cycleprompt.evaluation import EvalConfig, fmt_rate, sweep_thresholds
from cycleprompt.gate import GateConfig
from cycleprompt.segmenter import SegmenterSpec
from cycleprompt.synth import DEFAULT_SEED, SynthSpec, write_corpus

TAUS = [0.0, 0.01, 0.05, 0.1, 0.18, 0.3, 0.5, 0.7, 0.9, 1.0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--out", default="runs/synthetic_sweep")
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    manifest = write_corpus(Path(args.out) / "corpus", SynthSpec(seed=args.seed))
    primary = SegmenterSpec("reference-ncc")
    fallback = SegmenterSpec("reference-ncc", {"relative_threshold": 0.9, "absolute_floor": 0.5})
    setups = {
        "single stage": GateConfig.single(primary),
        "cascade (stage 2 at 0.015)": GateConfig.cascade(primary, fallback),
    }
    for name, g in setups.items():
        print(f"\n{name}")
        print(f"{'tau':>6}  {'catch':>8}  {'yield':>8}  {'pes':>8}")
        for tau, rep in sweep_thresholds(manifest, EvalConfig(g), TAUS, workers=args.workers):
            print(f"{tau:6.3f}  {fmt_rate(rep.catch_rate):>8}  {fmt_rate(rep.yield_rate):>8}  "
                  f"{fmt_rate(rep.pes):>8}")


if __name__ == "__main__":
    main()
