"""Flat ``key = value`` run configuration (grammar in docs/config.md)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from cycleprompt.augment import AugmentPolicy
from cycleprompt.errors import DataIOError, ValidationError
from cycleprompt.evaluation import EvalConfig
from cycleprompt.gate import GateConfig, Stage
from cycleprompt.segmenter import SegmenterSpec


class ConfigError(ValidationError):
    pass


_TOP_KEYS = {
    "manifest", "output_dir", "workers", "emit_mask_artifacts", "miou_mode",
    "catch_iou_threshold", "yield_response_threshold",
}
_STAGE_KEYS = {"kind", "threshold", "relative_threshold", "absolute_floor", "table"}
_AUGMENT_KEYS = {"brightness", "contrast", "saturation", "hflip_probability", "seed"}


@dataclass(frozen=True, eq=False)
class RunConfig:
    eval: EvalConfig
    manifest_path: Path
    output_dir: Path
    worker_count: int = 1
    emit_mask_artifacts: bool = False
    augment: AugmentPolicy | None = None


def parse_flat(text: str, source: str = "<config>") -> dict[str, tuple[str, int]]:
    """Return ``key -> (raw value, line number)``."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        out[key] = (value, lineno)
    return out


class _Reader:
    def __init__(self, raw: dict, source: str):
        self.raw = raw
        self.source = source

    def where(self, key):
        return f"{self.source}:{self.raw[key][1]}: {key}" if key in self.raw else f"{self.source}: {key}"

    def fail(self, key, msg):
        raise ConfigError(f"{self.where(key)}: {msg}")

    def str(self, key, default=None):
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"{self.source}: missing required key '{key}'")
            return default
        return self.raw[key][0]

    def float(self, key, default, lo=0.0, hi=1.0):
        if key not in self.raw:
            return default
        try:
            v = float(self.raw[key][0])
        except ValueError:
            self.fail(key, f"not a number: {self.raw[key][0]!r}")
        if not lo <= v <= hi:
            self.fail(key, f"must be in [{lo:g}, {hi:g}], got {v:g}")
        return v

    def int(self, key, default, lo=None):
        if key not in self.raw:
            return default
        try:
            v = int(self.raw[key][0])
        except ValueError:
            self.fail(key, f"not an integer: {self.raw[key][0]!r}")
        if lo is not None and v < lo:
            self.fail(key, f"must be >= {lo}, got {v}")
        return v

    def bool(self, key, default):
        if key not in self.raw:
            return default
        v = self.raw[key][0].lower()
        if v in ("true", "yes", "1", "on"):
            return True
        if v in ("false", "no", "0", "off"):
            return False
        self.fail(key, f"not a boolean: {self.raw[key][0]!r}")

    def pair(self, key, default):
        if key not in self.raw:
            return default
        parts = [p.strip() for p in self.raw[key][0].split(",")]
        try:
            lo, hi = (float(p) for p in parts)
        except ValueError:
            self.fail(key, f"expected 'lo, hi', got {self.raw[key][0]!r}")
        return lo, hi


def _stages(r: _Reader, base: Path) -> tuple[Stage, ...]:
    indices = set()
    for key in r.raw:
        if key.startswith("stage."):
            parts = key.split(".")
            if len(parts) != 3 or not parts[1].isdigit() or parts[2] not in _STAGE_KEYS:
                r.fail(key, "expected stage.<n>.<" + "|".join(sorted(_STAGE_KEYS)) + ">")
            indices.add(int(parts[1]))
    if not indices:
        raise ConfigError(f"{r.source}: at least one stage (stage.1.kind) is required")
    if sorted(indices) != list(range(1, max(indices) + 1)):
        raise ConfigError(f"{r.source}: stages must be numbered 1..N without gaps, got {sorted(indices)}")
    stages = []
    for i in sorted(indices):
        p = f"stage.{i}."
        kind = r.str(p + "kind")
        params = {}
        if kind == "reference-ncc":
            params["relative_threshold"] = r.float(p + "relative_threshold", 0.8)
            params["absolute_floor"] = r.float(p + "absolute_floor", 0.2, lo=-1.0)
        elif kind == "scripted":
            params["table"] = str(base / r.str(p + "table"))
        try:
            spec = SegmenterSpec(kind, params)
        except ValidationError as exc:
            r.fail(p + "kind", str(exc))
        stages.append(Stage(spec, r.float(p + "threshold", 0.18 if i == 1 else 0.015)))
    return tuple(stages)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise DataIOError(f"missing config file: {path}") from exc
    return config_from_text(text, base=path.parent, source=str(path))


def config_from_text(text: str, base: Path = Path("."), source: str = "<config>") -> RunConfig:
    r = _Reader(parse_flat(text, source), source)
    for key in r.raw:
        head = key.split(".", 1)[0]
        if head == "augment":
            if key.split(".", 1)[-1] not in _AUGMENT_KEYS:
                r.fail(key, "unknown augment key")
        elif head != "stage" and key not in _TOP_KEYS:
            r.fail(key, "unknown key")

    miou_mode = r.str("miou_mode", "foreground-only")
    if miou_mode not in ("foreground-only", "two-class-mean"):
        r.fail("miou_mode", f"must be foreground-only or two-class-mean, got {miou_mode!r}")
    gate = GateConfig(_stages(r, base), miou_mode=miou_mode)
    ev = EvalConfig(
        gate,
        catch_iou_threshold=r.float("catch_iou_threshold", 0.3),
        yield_response_threshold=r.float("yield_response_threshold", 0.0),
    )
    augment = None
    if any(k.startswith("augment.") for k in r.raw):
        try:
            augment = AugmentPolicy(
                brightness_range=r.pair("augment.brightness", (0.8, 1.2)),
                contrast_range=r.pair("augment.contrast", (0.8, 1.2)),
                saturation_range=r.pair("augment.saturation", (0.8, 1.2)),
                hflip_probability=r.float("augment.hflip_probability", 0.5),
                seed=r.int("augment.seed", 0, lo=0),
            )
        except ConfigError:
            raise
        except ValidationError as exc:
            raise ConfigError(f"{source}: augment: {exc}") from exc
    return RunConfig(
        eval=ev,
        manifest_path=base / r.str("manifest"),
        output_dir=base / r.str("output_dir", "out"),
        worker_count=r.int("workers", 1, lo=1),
        emit_mask_artifacts=r.bool("emit_mask_artifacts", False),
        augment=augment,
    )
