"""Command-line entry point.

    cycleprompt synth     --out DIR [--seed N] [--positives N] [--negatives N] [--size N]
    cycleprompt evaluate  --config PATH [--out DIR] [--workers N]
    cycleprompt sweep     --config PATH --taus 0,0.18,1 [--out DIR] [--workers N]
    cycleprompt augment   --config PATH [--out DIR]
    cycleprompt selfcheck [--seed N]

Exit codes: 0 ok, 1 validation, 2 I/O, 3 internal. Failures print one line
``cycleprompt: error[<kind>]: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from cycleprompt.augment import apply_policy
from cycleprompt.config import RunConfig, load_config
from cycleprompt.errors import DataIOError, ValidationError
from cycleprompt.evaluation import (
    EvalReport,
    PairManifestEntry,
    evaluate,
    fmt_rate,
    load_manifest,
    summary_csv,
    sweep_thresholds,
    write_manifest,
)
from cycleprompt.gate import GateError
from cycleprompt.raster import load_mask, load_raster, save_mask, save_raster
from cycleprompt.segmenter import SegmenterError
from cycleprompt.synth import DEFAULT_SEED, SynthSpec, write_corpus

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def _load_run(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ValidationError(f"--workers must be >= 1, got {args.workers}")
        cfg = RunConfig(cfg.eval, cfg.manifest_path, cfg.output_dir, args.workers,
                        cfg.emit_mask_artifacts, cfg.augment)
    if getattr(args, "out", None):
        cfg = RunConfig(cfg.eval, cfg.manifest_path, Path(args.out), cfg.worker_count,
                        cfg.emit_mask_artifacts, cfg.augment)
    return cfg


def write_report(out: Path, report: EvalReport, emit_masks: bool) -> None:
    """All files are written here, from one thread, after evaluation finishes."""
    _ensure_dir(out)
    _write(out / "report.json", report.to_json())
    _write(out / "summary.csv", summary_csv([(report.threshold, report)]))
    mask_dir = _ensure_dir(out / "masks") if emit_masks else None
    lines = []
    for rec in report.records:
        refs = None
        if mask_dir is not None:
            refs = {}
            for kind, m in (("forward", rec.forward_mask), ("reverse", rec.reverse_mask),
                            ("final", rec.final_mask)):
                name = f"{rec.pair_id}_{kind}.png"
                save_mask(mask_dir / name, m)
                refs[kind] = f"masks/{name}"
        lines.append(json.dumps(rec.to_dict(refs), sort_keys=True))
    _write(out / "records.jsonl", "".join(line + "\n" for line in lines))


def cmd_evaluate(args) -> int:
    cfg = _load_run(args)
    report = evaluate(cfg.manifest_path, cfg.eval, workers=cfg.worker_count)
    write_report(cfg.output_dir, report, cfg.emit_mask_artifacts)
    print(f"catch_rate={fmt_rate(report.catch_rate)} yield_rate={fmt_rate(report.yield_rate)} "
          f"pes={fmt_rate(report.pes)} -> {cfg.output_dir}")
    return EXIT_OK


def parse_taus(text: str) -> list[float]:
    try:
        taus = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ValidationError(f"--taus: {exc}") from exc
    if not taus:
        raise ValidationError("--taus: empty list")
    bad = [t for t in taus if not 0.0 <= t <= 1.0]
    if bad:
        raise ValidationError(f"--taus: values must be in [0, 1], got {bad}")
    return taus


def cmd_sweep(args) -> int:
    cfg = _load_run(args)
    taus = parse_taus(args.taus)
    rows = sweep_thresholds(cfg.manifest_path, cfg.eval, taus, workers=cfg.worker_count)
    text = summary_csv(rows)
    _ensure_dir(cfg.output_dir)
    _write(cfg.output_dir / "sweep.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(n_positive=args.positives, n_negative=args.negatives,
                     size=args.size, seed=args.seed)
    manifest = write_corpus(args.out, spec)
    print(f"wrote {spec.n_positive + spec.n_negative} pairs -> {manifest}")
    return EXIT_OK


def augment_manifest(entries: list[PairManifestEntry], policy, out_dir: Path) -> Path:
    """Support pair ``i`` uses draw ``2i``, its query ``2i + 1``."""
    img_dir = _ensure_dir(out_dir / "images")
    new = []
    for i, e in enumerate(entries):
        try:
            s, m = load_raster(e.support_image_path), load_mask(e.support_mask_path)
            q = load_raster(e.query_image_path)
            gt = load_mask(e.gt_mask_path) if e.gt_mask_path is not None else None
        except (DataIOError, ValidationError) as exc:
            raise type(exc)(f"pair {e.pair_id!r}: {exc}") from exc
        s2, m2 = apply_policy(s, m, policy, 2 * i)
        q_mask = gt if gt is not None else np.zeros(q.shape[:2], dtype=bool)
        q2, gt2 = apply_policy(q, q_mask, policy, 2 * i + 1)
        paths = {k: img_dir / f"{e.pair_id}_{k}.png" for k in ("support", "support_mask", "query", "gt")}
        save_raster(paths["support"], s2)
        save_mask(paths["support_mask"], m2)
        save_raster(paths["query"], q2)
        if gt is not None:
            save_mask(paths["gt"], gt2)
        new.append(PairManifestEntry(e.pair_id, paths["support"], paths["support_mask"],
                                     paths["query"], paths["gt"] if gt is not None else None,
                                     e.polarity))
    manifest = out_dir / "manifest.jsonl"
    write_manifest(manifest, new)
    return manifest


def cmd_augment(args) -> int:
    cfg = _load_run(args)
    if cfg.augment is None:
        raise ValidationError(f"{args.config}: no augment.* keys; nothing to do")
    entries = load_manifest(cfg.manifest_path)
    manifest = augment_manifest(entries, cfg.augment, cfg.output_dir)
    print(f"augmented {len(entries)} pairs -> {manifest}")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from cycleprompt.selfcheck import run_all

    ok = True
    for name, passed, detail in run_all(args.seed):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if ok else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cycleprompt", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("evaluate", help="gate and score a manifest")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    e.add_argument("--workers", type=int)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="evaluate over several stage-1 thresholds")
    s.add_argument("--config", required=True)
    s.add_argument("--taus", required=True, help="comma-separated, e.g. 0,0.18,1")
    s.add_argument("--out")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    y = sub.add_parser("synth", help="generate the synthetic corpus")
    y.add_argument("--out", required=True)
    y.add_argument("--seed", type=int, default=DEFAULT_SEED)
    y.add_argument("--positives", type=int, default=SynthSpec.n_positive)
    y.add_argument("--negatives", type=int, default=SynthSpec.n_negative)
    y.add_argument("--size", type=int, default=SynthSpec.size)
    y.set_defaults(func=cmd_synth)

    a = sub.add_parser("augment", help="apply the augmentation policy to a manifest")
    a.add_argument("--config", required=True)
    a.add_argument("--out")
    a.set_defaults(func=cmd_augment)

    c = sub.add_parser("selfcheck", help="run the invariant checks on built-ins")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_selfcheck)
    return p


def _fail(kind: str, code: int, exc: BaseException) -> int:
    msg = " ".join(str(exc).split())
    print(f"cycleprompt: error[{kind}]: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GateError as exc:
        if isinstance(exc.cause, DataIOError):
            return _fail("io", EXIT_IO, exc)
        return _fail("segmenter", EXIT_VALIDATION, exc)
    except (ValidationError, SegmenterError) as exc:
        return _fail("validation", EXIT_VALIDATION, exc)
    except OSError as exc:
        return _fail("io", EXIT_IO, exc)
    except Exception as exc:  # noqa: BLE001
        return _fail("internal", EXIT_INTERNAL, exc)


if __name__ == "__main__":
    sys.exit(main())
