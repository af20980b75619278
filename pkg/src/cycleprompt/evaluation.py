"""Catch rate / yield rate / PES scoring over a manifest of prompt pairs.

Positive pairs are a *good catch* when ``iou(final_mask, gt) >= catch_iou_threshold``.
Negative pairs are a *correct yield* when
``response_rate(final_mask) <= yield_response_threshold``. PES is the arithmetic
mean of the two rates.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from cycleprompt.errors import DataIOError, ValidationError
from cycleprompt.gate import CycleRecord, GateConfig, gate
from cycleprompt.raster import iou, load_mask, load_raster, response_rate

POLARITIES = ("positive", "negative")


@dataclass(frozen=True)
class PairManifestEntry:
    pair_id: str
    support_image_path: Path
    support_mask_path: Path
    query_image_path: Path
    gt_mask_path: Path | None
    polarity: str

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValidationError(
                f"pair {self.pair_id!r}: polarity must be one of {POLARITIES}, got {self.polarity!r}"
            )
        if self.polarity == "positive" and self.gt_mask_path is None:
            raise ValidationError(f"pair {self.pair_id!r}: positive pair lacks gt_mask_path")

    def to_json(self, base: Path | None = None) -> dict:
        def rel(p):
            if p is None:
                return None
            return str(Path(p).relative_to(base)) if base else str(p)

        out = {
            "pair_id": self.pair_id,
            "support_image_path": rel(self.support_image_path),
            "support_mask_path": rel(self.support_mask_path),
            "query_image_path": rel(self.query_image_path),
            "polarity": self.polarity,
        }
        if self.gt_mask_path is not None:
            out["gt_mask_path"] = rel(self.gt_mask_path)
        return out


def _image_size(path: Path, pair_id: str) -> tuple[int, int]:
    if not path.is_file():
        raise DataIOError(f"pair {pair_id!r}: missing file {path}")
    try:
        with Image.open(path) as im:
            return im.size
    except OSError as exc:
        raise DataIOError(f"pair {pair_id!r}: unreadable image {path}: {exc}") from exc


def load_manifest(path: str | Path, check_files: bool = True) -> list[PairManifestEntry]:
    """Parse a JSON Lines manifest; relative paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise DataIOError(f"missing manifest: {path}") from exc
    base = path.parent
    entries: list[PairManifestEntry] = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            pid = str(rec["pair_id"])
            gt = rec.get("gt_mask_path")
            entry = PairManifestEntry(
                pair_id=pid,
                support_image_path=base / rec["support_image_path"],
                support_mask_path=base / rec["support_mask_path"],
                query_image_path=base / rec["query_image_path"],
                gt_mask_path=None if gt is None else base / gt,
                polarity=rec["polarity"],
            )
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}:{lineno}: missing or bad field {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        if pid in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate pair_id {pid!r}")
        seen.add(pid)
        if check_files:
            _check_entry_files(entry)
        entries.append(entry)
    return entries


def _check_entry_files(e: PairManifestEntry) -> None:
    s = _image_size(e.support_image_path, e.pair_id)
    sm = _image_size(e.support_mask_path, e.pair_id)
    q = _image_size(e.query_image_path, e.pair_id)
    if s != sm:
        raise ValidationError(f"pair {e.pair_id!r}: support image {s} and mask {sm} differ in size")
    if e.gt_mask_path is not None:
        g = _image_size(e.gt_mask_path, e.pair_id)
        if g != q:
            raise ValidationError(f"pair {e.pair_id!r}: query image {q} and gt mask {g} differ in size")


def write_manifest(path: str | Path, entries: Iterable[PairManifestEntry]) -> None:
    path = Path(path)
    base = path.parent.resolve()
    lines = []
    for e in entries:
        e_abs = PairManifestEntry(
            e.pair_id,
            Path(e.support_image_path).resolve(),
            Path(e.support_mask_path).resolve(),
            Path(e.query_image_path).resolve(),
            None if e.gt_mask_path is None else Path(e.gt_mask_path).resolve(),
            e.polarity,
        )
        lines.append(json.dumps(e_abs.to_json(base)))
    path.write_text("".join(line + "\n" for line in lines))


@dataclass(frozen=True, eq=False)
class EvalConfig:
    gate: GateConfig
    catch_iou_threshold: float = 0.3
    yield_response_threshold: float = 0.0

    def __post_init__(self):
        for name in ("catch_iou_threshold", "yield_response_threshold"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {v}")
            object.__setattr__(self, name, v)

    def with_threshold(self, tau: float, stage_index: int = 1) -> "EvalConfig":
        return EvalConfig(
            self.gate.with_threshold(tau, stage_index),
            self.catch_iou_threshold,
            self.yield_response_threshold,
        )


@dataclass(frozen=True)
class PairOutcome:
    pair_id: str
    polarity: str
    metric: float  # iou vs gt for positives, response rate for negatives
    verdict: str  # good-catch | miss | correct-yield | false-positive
    stage_index: int
    confidence: float
    decision: str

    @property
    def success(self) -> bool:
        return self.verdict in ("good-catch", "correct-yield")

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "polarity": self.polarity,
            "metric": "iou" if self.polarity == "positive" else "response_rate",
            "value": self.metric,
            "verdict": self.verdict,
            "stage_index": self.stage_index,
            "confidence": self.confidence,
            "decision": self.decision,
        }


def score_pair(entry: PairManifestEntry, record: CycleRecord, cfg: EvalConfig,
               gt_mask: np.ndarray | None = None) -> PairOutcome:
    if record.pair_id is not None and record.pair_id != entry.pair_id:
        raise ValidationError(f"record for {record.pair_id!r} scored against {entry.pair_id!r}")
    if entry.polarity == "positive":
        if gt_mask is None:
            if entry.gt_mask_path is None:
                raise ValidationError(f"pair {entry.pair_id!r}: positive pair lacks a gt mask")
            gt_mask = load_mask(entry.gt_mask_path)
        value = iou(record.final_mask, gt_mask)
        verdict = "good-catch" if value >= cfg.catch_iou_threshold else "miss"
    else:
        value = response_rate(record.final_mask)
        verdict = "correct-yield" if value <= cfg.yield_response_threshold else "false-positive"
    return PairOutcome(entry.pair_id, entry.polarity, value, verdict,
                       record.stage_index, record.confidence, record.decision)


def pes(catch_rate: float | None, yield_rate: float | None) -> float | None:
    if catch_rate is None or yield_rate is None:
        return None
    return (catch_rate + yield_rate) / 2


@dataclass(frozen=True, eq=False)
class EvalReport:
    catch_rate: float | None
    yield_rate: float | None
    pes: float | None
    n_positive: int
    n_negative: int
    threshold: float
    outcomes: tuple[PairOutcome, ...]
    records: tuple[CycleRecord, ...] = field(default=(), repr=False)
    settings: dict = field(default_factory=dict)

    @classmethod
    def from_outcomes(cls, outcomes: Sequence[PairOutcome], threshold: float,
                      records: Sequence[CycleRecord] = (), settings: dict | None = None):
        pos = [o for o in outcomes if o.polarity == "positive"]
        neg = [o for o in outcomes if o.polarity == "negative"]
        catch = sum(o.success for o in pos) / len(pos) if pos else None
        yld = sum(o.success for o in neg) / len(neg) if neg else None
        return cls(catch, yld, pes(catch, yld), len(pos), len(neg), threshold,
                   tuple(outcomes), tuple(records), dict(settings or {}))

    def summary(self) -> dict:
        return {
            "threshold": self.threshold,
            "catch_rate": self.catch_rate,
            "yield_rate": self.yield_rate,
            "pes": self.pes,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
            **self.settings,
        }

    def to_dict(self) -> dict:
        return {"summary": self.summary(), "pairs": [o.to_dict() for o in self.outcomes]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def fmt_rate(x: float | None) -> str:
    return "NA" if x is None else f"{x:.5f}"


def summary_csv(rows: Sequence[tuple[float, EvalReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "catch_rate", "yield_rate", "pes"])
    for tau, rep in rows:
        w.writerow([f"{tau:g}", fmt_rate(rep.catch_rate), fmt_rate(rep.yield_rate), fmt_rate(rep.pes)])
    return buf.getvalue()


def _load_pair(e: PairManifestEntry):
    try:
        s = load_raster(e.support_image_path)
        m = load_mask(e.support_mask_path)
        q = load_raster(e.query_image_path)
        gt = load_mask(e.gt_mask_path) if e.gt_mask_path is not None else None
    except (DataIOError, ValidationError) as exc:
        raise type(exc)(f"pair {e.pair_id!r}: {exc}") from exc
    return s, m, q, gt


def _run_pair(e: PairManifestEntry, cfg: EvalConfig, cache: dict | None):
    s, m, q, gt = _load_pair(e)
    record = gate(cfg.gate, s, m, q, pair_id=e.pair_id, cache=cache)
    return record, score_pair(e, record, cfg, gt_mask=gt)


def evaluate(manifest, cfg: EvalConfig, workers: int = 1,
             cache: dict | None = None) -> EvalReport:
    """Gate and score every pair; output order follows the manifest.

    ``manifest`` is a path or a list of entries. ``cache`` (pair_id -> per-stage
    traces) lets repeated calls skip segmenter work.
    """
    entries = load_manifest(manifest) if isinstance(manifest, (str, Path)) else list(manifest)
    if workers < 1:
        raise ValidationError(f"workers must be >= 1, got {workers}")
    if cache is not None:
        for e in entries:
            cache.setdefault(e.pair_id, {})

    def job(e):
        return _run_pair(e, cfg, None if cache is None else cache[e.pair_id])

    if workers == 1:
        results = [job(e) for e in entries]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, entries))
    settings = {
        "stage_thresholds": [s.threshold for s in cfg.gate.stages],
        "miou_mode": cfg.gate.miou_mode,
        "catch_iou_threshold": cfg.catch_iou_threshold,
        "yield_response_threshold": cfg.yield_response_threshold,
    }
    return EvalReport.from_outcomes(
        [o for _, o in results], cfg.gate.stages[0].threshold,
        records=[r for r, _ in results], settings=settings,
    )


def sweep_thresholds(manifest, base_cfg: EvalConfig, taus: Sequence[float],
                     workers: int = 1) -> list[tuple[float, EvalReport]]:
    """Evaluate at each stage-1 threshold, in the order given.

    Cycle traces are computed at most once per (pair, stage) and shared.
    """
    taus = [float(t) for t in taus]
    if not taus:
        raise ValidationError("sweep needs at least one threshold")
    for t in taus:
        if not 0.0 <= t <= 1.0:
            raise ValidationError(f"threshold must be in [0, 1], got {t}")
    entries = load_manifest(manifest) if isinstance(manifest, (str, Path)) else list(manifest)
    cache: dict = {}
    return [(t, evaluate(entries, base_cfg.with_threshold(t), workers, cache)) for t in taus]
