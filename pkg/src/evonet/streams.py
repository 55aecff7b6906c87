"""Stream sources: SEA concepts, a drifting regression generator, CSV files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class StreamFormatError(ValueError):
    """A stream file could not be parsed."""


@dataclass
class StreamBatch:
    X: np.ndarray  # (T, n)
    Y: np.ndarray  # (T, m); one-hot rows in classification
    index: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.X)


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _batches(X, Y, batch_size: int, concept_of=None) -> list[StreamBatch]:
    batches = []
    for k, start in enumerate(range(0, len(X), batch_size)):
        stop = start + batch_size
        meta = {}
        if concept_of is not None:
            meta["concepts"] = sorted(set(int(c) for c in concept_of[start:stop]))
        batches.append(StreamBatch(X[start:stop], Y[start:stop], k, meta))
    return batches


@dataclass
class SeaConfig:
    concept_thresholds: Sequence[float] = (8.0, 9.0, 7.0, 9.5)
    samples_per_concept: int = 50_000
    noise_rate: float = 0.1
    batch_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.concept_thresholds:
            raise ValueError("need at least one concept threshold")
        if not 0.0 <= self.noise_rate < 0.5:
            raise ValueError("noise_rate must be in [0, 0.5)")
        if self.samples_per_concept < 1 or self.batch_size < 1:
            raise ValueError("sizes must be positive")


def sea_labels(X, theta: float) -> np.ndarray:
    """Noise-free SEA rule: class 1 iff ``x1 + x2 <= theta``."""
    X = np.asarray(X, dtype=float)
    return (X[:, 0] + X[:, 1] <= theta).astype(int)


def sea_arrays(config: SeaConfig):
    rng = np.random.default_rng(config.seed)
    k = len(config.concept_thresholds)
    total = k * config.samples_per_concept
    X = rng.uniform(0.0, 10.0, size=(total, 3))
    concept = np.repeat(np.arange(k), config.samples_per_concept)
    theta = np.asarray(config.concept_thresholds, dtype=float)[concept]
    labels = (X[:, 0] + X[:, 1] <= theta).astype(int)
    flip = rng.random(total) < config.noise_rate
    labels = np.where(flip, 1 - labels, labels)
    return X, labels, concept


def generate_sea(config: SeaConfig | None = None) -> list[StreamBatch]:
    """SEA stream with abrupt threshold switches every ``samples_per_concept``."""
    config = config or SeaConfig()
    X, labels, concept = sea_arrays(config)
    return _batches(X, one_hot(labels, 2), config.batch_size, concept)


@dataclass
class RegressionConfig:
    omegas: Sequence[float] = (1.0, 2.0, -1.0)
    samples_per_concept: int = 10_000
    noise_std: float = 0.05
    outputs: int = 1
    batch_size: int = 500
    seed: int = 0

    def __post_init__(self):
        if not self.omegas:
            raise ValueError("need at least one concept frequency")
        if self.outputs not in (1, 2):
            raise ValueError("outputs must be 1 or 2")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def regression_targets(X, omega: float, outputs: int = 1) -> np.ndarray:
    """Noise-free map ``sin(w x1) + 0.5 x2`` (and ``cos(w x1) + 0.5 x2``)."""
    X = np.asarray(X, dtype=float)
    cols = [np.sin(omega * X[:, 0]) + 0.5 * X[:, 1]]
    if outputs == 2:
        cols.append(np.cos(omega * X[:, 0]) + 0.5 * X[:, 1])
    return np.column_stack(cols)


def regression_arrays(config: RegressionConfig):
    rng = np.random.default_rng(config.seed)
    k = len(config.omegas)
    total = k * config.samples_per_concept
    X = rng.uniform(-1.0, 1.0, size=(total, 2))
    concept = np.repeat(np.arange(k), config.samples_per_concept)
    Y = np.empty((total, config.outputs))
    for c, omega in enumerate(config.omegas):
        rows = concept == c
        Y[rows] = regression_targets(X[rows], omega, config.outputs)
    if config.noise_std:
        Y = Y + rng.normal(0.0, config.noise_std, size=Y.shape)
    return X, Y, concept


def generate_drifting_regression(config: RegressionConfig | None = None) -> list[StreamBatch]:
    config = config or RegressionConfig()
    X, Y, concept = regression_arrays(config)
    return _batches(X, Y, config.batch_size, concept)


def concept_boundaries(samples_per_concept: int, concepts: int) -> list[int]:
    """Sample index at which each concept starts."""
    return [i * samples_per_concept for i in range(concepts)]


# -- CSV ---------------------------------------------------------------------

@dataclass
class CsvStreamConfig:
    path: str
    target_columns: Sequence[str]
    normalization: str = "none"
    batch_size: int = 1000
    mode: str = "classification"
    n_classes: int | None = None

    def __post_init__(self):
        if self.normalization not in ("none", "minmax", "zscore"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if not self.target_columns:
            raise ValueError("need at least one target column")


def write_csv(path, X, targets, feature_names=None, target_names=("label",)) -> None:
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets)
    if targets.ndim == 1:
        targets = targets[:, None]
    feature_names = feature_names or [f"x{i + 1}" for i in range(X.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(feature_names) + list(target_names))
        for row, tgt in zip(X, targets):
            writer.writerow([repr(float(v)) for v in row] + [_fmt_target(v) for v in tgt])


def _fmt_target(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_metadata(path, meta: dict) -> Path:
    side = Path(str(path) + ".meta.json")
    side.write_text(json.dumps(meta, indent=2), encoding="utf-8")
    return side


def _normalizer(X0: np.ndarray, kind: str):
    if kind == "minmax":
        lo = X0.min(axis=0)
        span = X0.max(axis=0) - lo
        span = np.where(span > 0, span, 1.0)
        return lambda X: (X - lo) / span
    if kind == "zscore":
        mean = X0.mean(axis=0)
        std = X0.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return lambda X: (X - mean) / std
    return lambda X: X


def normalize_batches(batches, kind: str = "minmax") -> list[StreamBatch]:
    """Rescale features of every batch with statistics of the first batch."""
    batches = list(batches)
    if not batches or kind == "none":
        return batches
    scale = _normalizer(batches[0].X, kind)
    return [StreamBatch(scale(b.X), b.Y, b.index, b.meta) for b in batches]


def scale_targets(batches, kind: str = "minmax") -> list[StreamBatch]:
    """Rescale regression targets with statistics of the first batch.

    Min-max puts the first batch's targets on [0, 1], the same range as
    one-hot labels, which is the scale the width-growth rule expects.
    """
    batches = list(batches)
    if not batches or kind == "none":
        return batches
    scale = _normalizer(batches[0].Y, kind)
    return [StreamBatch(b.X, scale(b.Y), b.index, b.meta) for b in batches]


def ingest_csv(config: CsvStreamConfig) -> list[StreamBatch]:
    """Read a headed numeric CSV into batches in file order.

    Feature scaling statistics come from the first batch only.
    """
    path = Path(config.path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StreamFormatError(f"{path}: empty file") from None
        missing = [c for c in config.target_columns if c not in header]
        if missing:
            raise StreamFormatError(f"{path}: target columns not in header: {missing}")
        t_idx = [header.index(c) for c in config.target_columns]
        f_idx = [i for i in range(len(header)) if i not in t_idx]
        features, targets = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise StreamFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                features.append([float(row[i]) for i in f_idx])
            except ValueError:
                raise StreamFormatError(f"{path}:{lineno}: non-numeric feature value") from None
            raw = [row[i] for i in t_idx]
            if config.mode == "classification":
                try:
                    value = float(raw[0])
                except ValueError:
                    raise StreamFormatError(f"{path}:{lineno}: non-numeric class label {raw[0]!r}") from None
                if value != int(value) or value < 0:
                    raise StreamFormatError(f"{path}:{lineno}: class label must be a non-negative integer")
                targets.append(int(value))
            else:
                try:
                    targets.append([float(v) for v in raw])
                except ValueError:
                    raise StreamFormatError(f"{path}:{lineno}: non-numeric target value") from None
    if not features:
        return []
    X = np.array(features, dtype=float)
    if not np.all(np.isfinite(X)):
        raise StreamFormatError(f"{path}: non-finite feature values")
    if config.mode == "classification":
        n_classes = config.n_classes or (max(targets) + 1)
        Y = one_hot(targets, max(n_classes, 2))
    else:
        Y = np.array(targets, dtype=float)
    scale = _normalizer(X[: config.batch_size], config.normalization)
    return _batches(scale(X), Y, config.batch_size)


def stream_length(batches) -> int:
    return sum(len(b) for b in batches)
