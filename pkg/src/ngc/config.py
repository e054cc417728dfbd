"""Run configuration: one JSON document, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import SyntheticConfig
from .knn_graph import GraphParams
from .losses import LossParams
from .propagation import PropagationParams
from .trainer import Hyper, TrainParams


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class DataPaths:
    train_csv: str = "train.csv"
    test_csv: str = "test.csv"


@dataclass(frozen=True)
class DetectParams:
    zeta: float = 0.5


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "run"
    data: DataPaths = field(default_factory=DataPaths)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    graph: GraphParams = field(default_factory=GraphParams)
    propagation: PropagationParams = field(default_factory=PropagationParams)
    loss: LossParams = field(default_factory=LossParams)
    train: TrainParams = field(default_factory=TrainParams)
    detect: DetectParams = field(default_factory=DetectParams)
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    @property
    def hyper(self) -> Hyper:
        return Hyper(self.graph, self.propagation, self.loss, self.train)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self):
        checks = [
            ("synthetic", self.synthetic.validate),
            ("graph", self.graph.validate),
            ("propagation", self.propagation.validate),
            ("loss", self.loss.validate),
            ("train", self.train.validate),
        ]
        for name, check in checks:
            try:
                check()
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from None
        if not -1.0 <= self.detect.zeta <= 1.0:
            raise ConfigError("detect.zeta: must lie in [-1, 1]")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("base_dir")
        return out


_SECTIONS = {
    "data": DataPaths,
    "synthetic": SyntheticConfig,
    "graph": GraphParams,
    "propagation": PropagationParams,
    "loss": LossParams,
    "train": TrainParams,
    "detect": DetectParams,
}


def _coerce(path, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, raw, prefix):
    if not isinstance(raw, dict):
        raise ConfigError(f"{prefix}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    defaults = cls()
    for key, value in raw.items():
        path = f"{prefix}.{key}"
        if key not in known:
            raise ConfigError(f"{path}: unknown key")
        if key == "asym_mapping":
            if value is not None and not (isinstance(value, list) and all(isinstance(v, int) for v in value)):
                raise ConfigError(f"{path}: expected a list of integers or null")
            kwargs[key] = value
            continue
        kwargs[key] = _coerce(path, value, getattr(defaults, key))
    return cls(**kwargs)


def config_from_dict(raw: dict, base_dir=".") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    if "seed" not in raw:
        raise ConfigError("seed: required field missing")
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif key == "seed":
            kwargs[key] = _coerce("seed", value, 0)
        elif key == "out_dir":
            kwargs[key] = _coerce("out_dir", value, "")
        else:
            raise ConfigError(f"{key}: unknown key")
    cfg = RunConfig(**kwargs, base_dir=Path(base_dir))
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    """Read a JSON config; relative paths inside it resolve against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return config_from_dict(raw, base_dir=path.parent)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
