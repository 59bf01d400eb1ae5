"""Run configuration: one YAML document with ``data``, ``model``, ``train``,
``sample``, ``bench`` and ``sweep`` sections.

Every key is optional except ``train.seed`` and ``train.epochs``. Unknown
keys are errors so typos do not silently fall back to defaults. Model sizes
that the dataset fixes (frames, channels, classes) are taken from ``data``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data import DatasetSpec
from .errors import ConfigError
from .models import ModelConfig
from .ode import SolverKind
from .pipeline import SampleConfig, TrainConfig

__all__ = ["BenchConfig", "SweepConfig", "RunConfig", "DEFAULT_CONFIG", "parse_config", "load_config", "dump_config"]

DERIVED_MODEL_KEYS = ("n_frames", "n_channels", "n_classes", "system")
REQUIRED = (("train", "seed"), ("train", "epochs"))


@dataclass(frozen=True)
class BenchConfig:
    solvers: tuple[str, ...] = tuple(k.value for k in SolverKind if k.adaptive)
    alphas: tuple[float, ...] = (1.0, 2.0, 3.0)
    n_items: int = 100
    repeats: int = 5

    def __post_init__(self):
        object.__setattr__(self, "solvers", tuple(SolverKind(s).value for s in self.solvers))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.n_items < 1 or self.repeats < 1:
            raise ValueError("n_items and repeats must be positive")
        if any(a < 1 for a in self.alphas):
            raise ValueError("alphas must be >= 1")


@dataclass(frozen=True)
class SweepConfig:
    alphas: tuple[float, ...] = tuple(float(a) for a in range(1, 11))
    n_items: int = 200

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.n_items < 1:
            raise ValueError("n_items must be positive")
        if any(a < 1 for a in self.alphas):
            raise ValueError("alphas must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    data: DatasetSpec = field(default_factory=DatasetSpec)
    model: dict = field(default_factory=dict)  # ModelConfig overrides, minus the derived keys
    train: TrainConfig = field(default_factory=TrainConfig)
    sample: SampleConfig = field(default_factory=SampleConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def model_config(self, system: str) -> ModelConfig:
        d = self.data
        return ModelConfig(
            n_frames=d.n_frames, n_channels=d.n_channels, n_classes=d.n_classes, system=system, **self.model
        )

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            section = dict(value) if isinstance(value, dict) else dataclasses.asdict(value)
            out[f.name] = {k: _plain(v) for k, v in section.items()}
        return out


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if hasattr(v, "value"):  # enums
        return v.value
    return v


DEFAULT_CONFIG = {"train": {"seed": 0, "epochs": TrainConfig().epochs}}

_SECTIONS = {
    "data": DatasetSpec,
    "model": ModelConfig,
    "train": TrainConfig,
    "sample": SampleConfig,
    "bench": BenchConfig,
    "sweep": SweepConfig,
}


def _coerce(section: str, key: str, value, default):
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(where, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not hasattr(default, "value"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(where, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(where, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(where, f"expected a list, got {value!r}")
        return tuple(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(where, f"expected a string, got {value!r}")
    return value


def _section(name: str, raw) -> dict:
    cls = _SECTIONS[name]
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a mapping")
    defaults = {f.name: (f.default if f.default is not dataclasses.MISSING else f.default_factory()) for f in dataclasses.fields(cls)}
    allowed = set(defaults) - (set(DERIVED_MODEL_KEYS) if name == "model" else set())
    out = {}
    for key, value in raw.items():
        if key not in allowed:
            raise ConfigError(f"{name}.{key}", "unknown key")
        out[key] = _coerce(name, key, value, defaults[key])
    return out


def parse_config(doc) -> RunConfig:
    """Validate a parsed YAML mapping into a ``RunConfig``."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a mapping of sections")
    for key in doc:
        if key not in _SECTIONS:
            raise ConfigError(str(key), "unknown section")
    for section, key in REQUIRED:
        if not isinstance(doc.get(section), dict) or key not in doc[section]:
            raise ConfigError(f"{section}.{key}", "required field is missing")
    parts = {name: _section(name, doc.get(name)) for name in _SECTIONS}
    built = {}
    for name, values in parts.items():
        if name == "model":
            try:
                ModelConfig(**values)
            except (ValueError, TypeError) as exc:
                raise ConfigError(name, str(exc)) from exc
            built[name] = values
            continue
        try:
            built[name] = _SECTIONS[name](**values)
        except (ValueError, TypeError) as exc:
            raise ConfigError(name, str(exc)) from exc
    return RunConfig(**built)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML config; ``None`` gives the built-in defaults."""
    if path is None:
        return parse_config(DEFAULT_CONFIG)
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<root>", f"not valid YAML: {exc}") from exc
    return parse_config(doc if doc is not None else {})


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
