"""
Experiment configuration.

A JSON document is parsed into frozen dataclasses; unknown keys at any level
are rejected. A run manifest (``run.json``) is itself a valid config file.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .analysis.training import TrainConfig
from .core.cyclicnorm import SHIFT_VARIANTS
from .core.models import MODELS, build_forecaster
from .core.paradigms import Paradigm
from .core.windows import SyntheticSpec
from .utils.data_loader import MISSING_POLICIES
from .utils.validators import (
    PERIOD,
    ConfigurationError,
    ValidationError,
    require_multiple_of_period,
    validate_alpha,
    validate_ratios,
)

DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class DatasetConfig:
    """Exactly one source: a registry/URL ``name``, a local ``csv``, or ``synthetic``."""

    name: str = None
    csv: str = None
    url: str = None
    sha256: str = None
    cache_dir: str = "data/raw"
    synthetic: dict = None
    channels: tuple = None
    missing: str = "forward-fill"

    def __post_init__(self):
        sources = [k for k in ("name", "csv", "synthetic") if getattr(self, k) is not None]
        if len(sources) != 1:
            raise ConfigurationError(
                f"dataset needs exactly one of name, csv, synthetic; got {sources or 'none'}"
            )
        if self.missing not in MISSING_POLICIES:
            raise ConfigurationError(f"dataset.missing must be one of {MISSING_POLICIES}")
        if self.channels is not None:
            object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        if self.synthetic is not None:
            self.synthetic_spec()

    def synthetic_spec(self):
        try:
            return SyntheticSpec(**self.synthetic)
        except (TypeError, ValidationError) as e:
            raise ConfigurationError(f"dataset.synthetic: {e}") from None

    @property
    def label(self):
        """Short name for result tables."""
        if self.name is not None:
            return self.name
        return Path(self.csv).stem if self.csv is not None else "synthetic"


@dataclass(frozen=True)
class CyclicNormConfig:
    enabled: bool = True
    shift: str = None
    shift_means: bool = True
    shift_stds: bool = True

    def __post_init__(self):
        if self.shift is not None and self.shift not in SHIFT_VARIANTS:
            raise ConfigurationError(f"cyclicnorm.shift must be one of {SHIFT_VARIANTS}, got '{self.shift}'")

    def as_kwargs(self, enabled=None):
        """Keyword form for build_pipeline, or None when disabled."""
        if not (self.enabled if enabled is None else enabled):
            return None
        return {"enabled": True, "shift": self.shift,
                "shift_means": self.shift_means, "shift_stds": self.shift_stds}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=lambda: DatasetConfig(synthetic={}))
    split: tuple = (0.6, 0.2, 0.2)
    input_hours: int = 720
    horizons: tuple = (5,)
    paradigm: str = "seq2peak"
    paradigms: tuple = tuple(p.value for p in Paradigm)
    model: str = "linear"
    model_args: dict = field(default_factory=dict)
    cyclicnorm: CyclicNormConfig = field(default_factory=CyclicNormConfig)
    alpha: float = None
    alphas: tuple = DEFAULT_ALPHAS
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple = DEFAULT_SEEDS
    output: str = "results"

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "split", validate_ratios(tuple(self.split)))
        require_multiple_of_period(self.input_hours, "input_hours")
        horizons = tuple(int(h) for h in self.horizons)
        if not horizons or any(h < 1 for h in horizons):
            raise ConfigurationError(f"horizons must be positive day counts, got {self.horizons}")
        set_(self, "horizons", horizons)

        Paradigm.parse(self.paradigm)
        paradigms = tuple(Paradigm.parse(p).value for p in self.paradigms)
        if not paradigms:
            raise ConfigurationError("paradigms must not be empty")
        set_(self, "paradigms", paradigms)

        if self.model not in MODELS:
            raise ConfigurationError(f"Unknown model '{self.model}'. Use one of {sorted(MODELS)}")
        if not isinstance(self.model_args, dict):
            raise ConfigurationError(f"model_args must be an object, got {type(self.model_args).__name__}")
        build_forecaster(self.model, self.input_hours, PERIOD, 1, **self.model_args)
        if self.alpha is not None:
            _config_alpha(self.alpha, "alpha")
        set_(self, "alphas", tuple(_config_alpha(a, "alphas") for a in self.alphas))

        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigurationError("seeds must not be empty")
        set_(self, "seeds", seeds)

    @property
    def horizon_hours(self):
        """Longest configured horizon in hours."""
        return max(self.horizons) * PERIOD

    def to_dict(self):
        return _plain(asdict(self))


def _config_alpha(value, key):
    try:
        return validate_alpha(value)
    except (ValidationError, TypeError) as e:
        raise ConfigurationError(f"{key}: {e}") from None


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'} must be an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        where = f" in '{path}'" if path else ""
        raise ConfigurationError(f"Unknown config key(s){where}: {unknown}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigurationError(f"{path or 'config'}: {e}") from None


def from_dict(data):
    """Build an ExperimentConfig, rejecting unknown keys at every level."""
    data = dict(data)
    for key, cls in (("dataset", DatasetConfig), ("cyclicnorm", CyclicNormConfig), ("train", TrainConfig)):
        if key in data:
            data[key] = _build(cls, data[key], key)
    return _build(ExperimentConfig, data, "")


def parse_override(text):
    """'a.b=value' -> (['a', 'b'], value); value parsed as JSON, else kept as a string."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigurationError(f"Override '{text}' is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(data, overrides):
    """Apply dotted ``key=value`` overrides to a nested dict (copied)."""
    data = json.loads(json.dumps(data))
    for text in overrides or ():
        keys, value = parse_override(text)
        node = data
        for k in keys[:-1]:
            child = node.get(k)
            if child is None:
                child = node[k] = {}
            if not isinstance(child, dict):
                raise ConfigurationError(f"Override '{text}': '{k}' is not an object")
            node = child
        node[keys[-1]] = value
    return data


def load_config(path=None, overrides=()):
    """
    Read a JSON config (or run manifest) and apply overrides.

    Args:
        path: JSON file; None starts from the defaults
        overrides: Iterable of 'dotted.key=value' strings

    Raises:
        ConfigurationError: Unreadable file, invalid JSON, unknown keys or
            invalid values.
    """
    data = {}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigurationError(f"Config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: invalid JSON ({e})") from None
        if isinstance(data, dict) and {"config", "version"} <= set(data):
            data = data["config"]
    return from_dict(apply_overrides(data, overrides))
