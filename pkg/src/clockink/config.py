"""Pipeline configuration with dotted-key overrides (``crf.wrap_features=false``)."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .crf import CrfConfig


@dataclass(frozen=True)
class KMeansConfig:
    seed: int = 0
    restarts: int = 50


@dataclass(frozen=True)
class CircleConfig:
    circularity_min: float = 0.5
    length_frac_min: float = 0.5


@dataclass(frozen=True)
class SegmenterConfig:
    rounds: int = 50
    angle_thresh: float = 15.0      # threshold_segment fallback
    time_thresh: float = 5000.0


@dataclass(frozen=True)
class OverwriteConfig:
    theta1: float = 0.6
    theta2: float = 0.05


@dataclass(frozen=True)
class RecognizerConfig:
    tau_scale: float = 0.1
    per_class: int = 80             # exemplars kept per numeral
    seed: int = 0


@dataclass(frozen=True)
class RepairConfig:
    enabled: bool = True
    valley_mode: str = "both"
    ratio: float = 0.7
    eps: float = 1e-6


@dataclass(frozen=True)
class Config:
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    circle: CircleConfig = field(default_factory=CircleConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    overwrite: OverwriteConfig = field(default_factory=OverwriteConfig)
    recognizer: RecognizerConfig = field(default_factory=RecognizerConfig)
    crf: CrfConfig = field(default_factory=CrfConfig)
    repair: RepairConfig = field(default_factory=RepairConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        cfg = cls()
        for section, values in d.items():
            for key, value in values.items():
                cfg = cfg.override(f"{section}.{key}", value)
        return cfg

    @classmethod
    def load(cls, path) -> "Config":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def override(self, key: str, value) -> "Config":
        """Copy with one ``section.field`` replaced; strings are coerced to the field type."""
        try:
            section, name = key.split(".")
        except ValueError:
            raise KeyError(f"config keys look like 'section.field', got {key!r}") from None
        if section not in {f.name for f in dataclasses.fields(self)}:
            raise KeyError(f"unknown config section {section!r}")
        sub = getattr(self, section)
        types = {f.name: type(getattr(sub, f.name)) for f in dataclasses.fields(sub)}
        if name not in types:
            raise KeyError(f"unknown config key {key!r}")
        value = _coerce(value, types[name], key)
        return dataclasses.replace(self, **{section: dataclasses.replace(sub, **{name: value})})


def _coerce(value, typ, key):
    if not isinstance(value, str) or typ is str:
        if typ is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if typ is not str and not isinstance(value, typ):
            raise TypeError(f"{key} expects {typ.__name__}, got {value!r}")
        return value
    if typ is bool:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key} expects a boolean, got {value!r}")
    return typ(value)


def apply_overrides(cfg: Config, pairs) -> Config:
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"override must look like key=value, got {item!r}")
        cfg = cfg.override(key.strip(), value.strip())
    return cfg
