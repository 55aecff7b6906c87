"""Experiment configuration, read from INI-style ``.cfg`` files.

Example::

    [learner]
    mode = classification
    seed = 0
    alpha_drift = 0.0001
    alpha_warning = 0.0005
    delta = 0.55
    memory_cap =
    base_rate = 0.01
    insertion_head_rate = 0.1

    [ablation]
    disable_layer_growing = false
    disable_node_pruning = false
    disable_adaptive_memory = false
    disable_soft_forgetting = false

    [stream]
    kind = sea
    batch_size = 1000
    samples_per_concept = 50000
    noise_rate = 0.1
    thresholds = 8, 9, 7, 9.5
    normalization = zscore

``kind = regression`` takes ``omegas``, ``noise_std`` and ``outputs``;
``kind = csv`` takes ``path``, ``targets`` and ``normalization``.  The stream
seed follows the learner seed unless ``[stream] seed`` is given.

Left blank, ``base_rate`` is 0.01 for classification and 0.05 for
regression, and ``batch_size`` is 1000 for SEA and CSV streams and 500 for
the regression generator.  Regression targets are min-max scaled with
first-batch statistics unless ``target_scaling = none``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .drift import ALPHA_DRIFT, ALPHA_WARNING, MIN_WINDOW
from .memory import DELTA
from .network import BASE_RATE, MODES, REGRESSION
from .streams import (CsvStreamConfig, RegressionConfig, SeaConfig, generate_drifting_regression,
                      generate_sea, ingest_csv, normalize_batches, scale_targets)

# squared-error heads on [0, 1] targets see smaller gradients than softmax heads
REGRESSION_BASE_RATE = 0.05

# learning rate of the new output head during the replay pass after a layer insertion
INSERTION_HEAD_RATE = 0.1

ABLATIONS = ("disable_layer_growing", "disable_node_pruning",
             "disable_adaptive_memory", "disable_soft_forgetting")

# short names accepted on the command line
ABLATION_ALIASES = {
    "layer_growing": "disable_layer_growing",
    "node_pruning": "disable_node_pruning",
    "adaptive_memory": "disable_adaptive_memory",
    "soft_forgetting": "disable_soft_forgetting",
}


class ConfigError(ValueError):
    """Configuration could not be read or is invalid."""


@dataclass(frozen=True)
class AblationSwitches:
    disable_layer_growing: bool = False
    disable_node_pruning: bool = False
    disable_adaptive_memory: bool = False
    disable_soft_forgetting: bool = False

    @classmethod
    def from_names(cls, names) -> "AblationSwitches":
        flags = {}
        for raw in names:
            name = raw.strip().replace("-", "_")
            if not name:
                continue
            name = ABLATION_ALIASES.get(name, name)
            if name not in ABLATIONS:
                raise ConfigError(f"unknown ablation switch {raw!r}")
            flags[name] = True
        return cls(**flags)

    def active(self) -> list[str]:
        return [f.name for f in fields(self) if getattr(self, f.name)]

    def label(self) -> str:
        return "+".join(self.active()) or "full"


@dataclass(frozen=True)
class StreamSpec:
    kind: str = "sea"
    batch_size: int | None = None
    seed: int | None = None
    samples_per_concept: int | None = None
    noise_rate: float = 0.1
    thresholds: tuple = (8.0, 9.0, 7.0, 9.5)
    omegas: tuple = tuple(RegressionConfig.omegas)
    noise_std: float = 0.05
    outputs: int = 1
    path: str | None = None
    targets: tuple = ("label",)
    normalization: str = "zscore"
    target_scaling: str = "minmax"

    @property
    def size(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return RegressionConfig.batch_size if self.kind == "regression" else SeaConfig.batch_size


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "classification"
    seed: int = 0
    alpha_drift: float = ALPHA_DRIFT
    alpha_warning: float = ALPHA_WARNING
    delta: float = DELTA
    memory_cap: int | None = None
    base_rate: float | None = None
    insertion_head_rate: float = INSERTION_HEAD_RATE
    min_window: int = MIN_WINDOW
    include_timing: bool = False
    ablation: AblationSwitches = field(default_factory=AblationSwitches)
    stream: StreamSpec = field(default_factory=StreamSpec)

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.alpha_drift < self.alpha_warning < 1.0:
            raise ConfigError("need 0 < alpha_drift < alpha_warning < 1")
        if not 0.5 <= self.delta <= 1.0:
            raise ConfigError("delta must lie in [0.5, 1]")
        if self.memory_cap is not None and self.memory_cap < 1:
            raise ConfigError("memory_cap must be positive")
        if self.learning_rate < 0 or self.insertion_head_rate < 0:
            raise ConfigError("learning rates must be non-negative")
        if self.stream.kind not in ("sea", "regression", "csv"):
            raise ConfigError(f"unknown stream kind {self.stream.kind!r}")
        if self.stream.kind == "csv" and not self.stream.path:
            raise ConfigError("csv stream needs a path")
        for scaling in (self.stream.normalization, self.stream.target_scaling):
            if scaling not in ("none", "minmax", "zscore"):
                raise ConfigError(f"unknown normalization {scaling!r}")
        expected = {"sea": "classification", "regression": "regression"}.get(self.stream.kind)
        if expected and self.mode != expected:
            raise ConfigError(f"{self.stream.kind} streams need mode = {expected}")
        if self.stream.size < 2:
            raise ConfigError("batch_size must be at least 2")
        return self

    def with_overrides(self, **changes) -> "ExperimentConfig":
        stream_changes = changes.pop("stream", None) or {}
        cfg = replace(self, **{k: v for k, v in changes.items() if v is not None})
        if stream_changes:
            cfg = replace(cfg, stream=replace(cfg.stream, **stream_changes))
        return cfg.validate()

    @property
    def learning_rate(self) -> float:
        if self.base_rate is not None:
            return self.base_rate
        return REGRESSION_BASE_RATE if self.mode == REGRESSION else BASE_RATE

    @property
    def stream_seed(self) -> int:
        return self.seed if self.stream.seed is None else self.stream.seed


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _names(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    try:
        return _from_parser(parser, path.parent)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value in {path}: {exc}") from exc


def _from_parser(parser: configparser.ConfigParser, base: Path) -> ExperimentConfig:
    known = {"learner", "ablation", "stream"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    lr = parser["learner"] if parser.has_section("learner") else {}
    kwargs = {}
    if "mode" in lr:
        kwargs["mode"] = lr["mode"].strip()
    for key in ("seed", "min_window"):
        if key in lr:
            kwargs[key] = int(lr[key])
    for key in ("alpha_drift", "alpha_warning", "delta", "base_rate", "insertion_head_rate"):
        if lr.get(key, "").strip():
            kwargs[key] = float(lr[key])
    if lr.get("memory_cap", "").strip():
        kwargs["memory_cap"] = int(lr["memory_cap"])
    if "include_timing" in lr:
        kwargs["include_timing"] = parser.getboolean("learner", "include_timing")

    if parser.has_section("ablation"):
        flags = {}
        for key in parser["ablation"]:
            if key not in ABLATIONS:
                raise ConfigError(f"unknown ablation switch {key!r}")
            flags[key] = parser.getboolean("ablation", key)
        kwargs["ablation"] = AblationSwitches(**flags)

    if parser.has_section("stream"):
        st = parser["stream"]
        s = {}
        for key in ("kind", "normalization", "target_scaling"):
            if key in st:
                s[key] = st[key].strip()
        for key in ("batch_size", "samples_per_concept", "outputs", "seed"):
            if st.get(key, "").strip():
                s[key] = int(st[key])
        for key in ("noise_rate", "noise_std"):
            if key in st:
                s[key] = float(st[key])
        for key in ("thresholds", "omegas"):
            if key in st:
                s[key] = _floats(st[key])
        if "targets" in st:
            s["targets"] = _names(st["targets"])
        if "path" in st:
            p = Path(st["path"].strip())
            s["path"] = str(p if p.is_absolute() else base / p)
        kwargs["stream"] = StreamSpec(**s)
    return ExperimentConfig(**kwargs).validate()


def build_stream(config: ExperimentConfig):
    """Materialise the configured stream as a list of batches.

    Features are rescaled with first-batch statistics (``normalization``,
    z-score by default) for generated and CSV streams alike, and so are
    regression targets (``target_scaling``).
    """
    s = config.stream
    seed = config.stream_seed
    if s.kind == "sea":
        batches = normalize_batches(generate_sea(SeaConfig(
            s.thresholds, s.samples_per_concept or SeaConfig.samples_per_concept,
            s.noise_rate, s.size, seed)), s.normalization)
    elif s.kind == "regression":
        batches = normalize_batches(generate_drifting_regression(RegressionConfig(
            s.omegas, s.samples_per_concept or RegressionConfig.samples_per_concept,
            s.noise_std, s.outputs, s.size, seed)), s.normalization)
    else:
        batches = ingest_csv(CsvStreamConfig(s.path, s.targets, s.normalization, s.size, config.mode))
    if config.mode == REGRESSION:
        batches = scale_targets(batches, s.target_scaling)
    return batches
