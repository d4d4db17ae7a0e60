"""Run configuration: a strict TOML schema over the module configs.

Unknown keys are rejected by dotted name so typos fail loudly; every
default matches the published operating point of the pipeline.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .detection import DEFAULT_MIN_SCORE, DEFAULT_NMS_RADIUS
from .epipolar import RansacConfig
from .labelgen import LabelGenConfig
from .matching import DEFAULT_MIN_SIMILARITY
from .posebench import BenchConfig
from .representation import DEFAULT_WINDOWS, TimeWindowSet

__all__ = ["ConfigError", "MatcherConfig", "DetectionConfig", "RunConfig", "load_config"]


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class MatcherConfig:
    min_similarity: float = DEFAULT_MIN_SIMILARITY
    mutual: bool = True


@dataclass(frozen=True)
class DetectionConfig:
    min_score: float = DEFAULT_MIN_SCORE
    radius: int = DEFAULT_NMS_RADIUS
    top_k: int | None = None


@dataclass(frozen=True)
class RunConfig:
    windows: TimeWindowSet = DEFAULT_WINDOWS
    threads: int = 0  # 0 = use SUPEREVENT_THREADS or the CPU count
    matcher: MatcherConfig = field(default_factory=MatcherConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    labelgen: LabelGenConfig = field(default_factory=LabelGenConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)


_SCALARS = {bool: "bool", int: "int", float: "float", str: "str"}


def _coerce(key: str, value, target_type):
    if target_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if target_type is int and isinstance(value, bool):
        raise ConfigError(key, "expected int, got bool")
    if not isinstance(value, target_type):
        raise ConfigError(key, f"expected {_SCALARS.get(target_type, target_type)}, "
                               f"got {type(value).__name__}")
    return value


def _dataclass_from_table(cls, table: dict, prefix: str, overrides: dict | None = None):
    known = {f.name: f for f in fields(cls)}
    kwargs = dict(overrides or {})
    for key, value in table.items():
        dotted = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise ConfigError(dotted, "unknown key")
        if key in kwargs:
            continue  # sub-tables handled by the caller
        ftype = known[key].type
        if ftype in ("float", float):
            kwargs[key] = _coerce(dotted, value, float)
        elif ftype in ("int", int):
            kwargs[key] = _coerce(dotted, value, int)
        elif ftype in ("bool", bool):
            kwargs[key] = _coerce(dotted, value, bool)
        elif ftype in ("int | None",):
            kwargs[key] = _coerce(dotted, value, int)
        elif ftype in ("tuple[float, ...]",):
            if not isinstance(value, list):
                raise ConfigError(dotted, "expected a list of numbers")
            kwargs[key] = tuple(_coerce(f"{dotted}[{i}]", v, float) for i, v in enumerate(value))
        else:
            raise ConfigError(dotted, f"unsupported value for {ftype}")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(prefix or cls.__name__, str(exc)) from None


def load_config(path: Path | str | None) -> RunConfig:
    """Parse TOML into a RunConfig; None loads pure defaults."""
    if path is None:
        return RunConfig()
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return parse_config(doc)


def parse_config(doc: dict) -> RunConfig:
    kwargs: dict = {}
    for key, value in doc.items():
        if key == "windows":
            if not isinstance(value, list):
                raise ConfigError("windows", "expected a list of seconds")
            try:
                kwargs["windows"] = TimeWindowSet(
                    tuple(_coerce(f"windows[{i}]", v, float) for i, v in enumerate(value))
                )
            except ValueError as exc:
                raise ConfigError("windows", str(exc)) from None
        elif key == "threads":
            kwargs["threads"] = _coerce("threads", value, int)
        elif key == "matcher":
            kwargs["matcher"] = _dataclass_from_table(MatcherConfig, value, "matcher")
        elif key == "detection":
            kwargs["detection"] = _dataclass_from_table(DetectionConfig, value, "detection")
        elif key == "labelgen":
            kwargs["labelgen"] = _dataclass_from_table(LabelGenConfig, value, "labelgen")
        elif key == "bench":
            sub = dict(value)
            ransac_tbl = sub.pop("ransac", None)
            overrides = {}
            if ransac_tbl is not None:
                overrides["ransac"] = _dataclass_from_table(
                    RansacConfig, ransac_tbl, "bench.ransac"
                )
            bench = _dataclass_from_table(BenchConfig, sub, "bench", overrides)
            kwargs["bench"] = bench
        else:
            raise ConfigError(key, "unknown key")
    cfg = RunConfig(**kwargs)
    # the matcher threshold feeds the benchmark's in-process matching unless
    # [bench] pins its own
    if "matcher" in kwargs and "min_similarity" not in doc.get("bench", {}):
        cfg = replace(cfg, bench=replace(cfg.bench, min_similarity=cfg.matcher.min_similarity))
    return cfg
