"""Prequential test-then-train loop around the evolving network.

Every batch is first used for testing (metrics, drift record, memory
admission) and only then for training.  The drift state decides how the
batch is used for training:

* drift   - insert a new one-unit top layer, replay memory and the warning
            buffer, then train on the batch;
* warning - hold the batch in the detector's warning buffer;
* stable  - train on the batch, adapting the top layer's width per sample.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import ExperimentConfig
from .drift import DRIFT, STABLE, WARNING, DriftDetector
from .memory import AdaptiveMemory, replay_set
from .network import CLASSIFICATION, EvolvingNetwork, NumericError
from .relevance import layer_scores, learning_rates
from .significance import GROW, PRUNE, SignificanceState, adapt_width
from .streams import StreamBatch

NDEI_FLOOR = 1e-12


class BatchError(RuntimeError):
    """Training failed on a specific batch."""

    def __init__(self, batch_index: int, cause: Exception):
        super().__init__(f"batch {batch_index}: {cause}")
        self.batch_index = batch_index


@dataclass
class BatchMetrics:
    batch_index: int
    samples: int
    loss: float
    layer_count: int
    node_counts: list[int]
    param_count: int
    drift_state: str
    accuracy: float | None = None
    rmse: float | None = None
    ndei: float | None = None
    memory_size: int = 0
    events: list[dict] = field(default_factory=list)
    wall_time: float | None = None

    def record(self, include_timing: bool = False) -> dict:
        out = asdict(self)
        if not include_timing:
            out.pop("wall_time")
        return out


class Learner:
    """Evolving network plus its drift detector, memory and width monitors."""

    def __init__(self, input_dim: int, output_dim: int, config: ExperimentConfig | None = None):
        self.config = config = (config or ExperimentConfig()).validate()
        self.rng = np.random.default_rng(config.seed)
        self.net = EvolvingNetwork.create(input_dim, output_dim, config.mode, rng=self.rng)
        self.net.head.eta = config.learning_rate
        for layer in self.net.layers:
            layer.eta = config.learning_rate
        self.significance = SignificanceState.for_inputs(input_dim)
        self.detector = DriftDetector(config.mode, config.alpha_drift, config.alpha_warning, config.min_window)
        self.memory = AdaptiveMemory(input_dim, config.delta, config.memory_cap,
                                     use_confidence=config.mode == CLASSIFICATION)
        self.batches_seen = 0

    @property
    def classification(self) -> bool:
        return self.config.mode == CLASSIFICATION

    # -- test phase ------------------------------------------------------

    def _test(self, batch: StreamBatch, metrics: dict):
        trace = self.net.forward(batch.X)
        out, Y = trace.output, batch.Y
        if self.classification:
            wrong = (out.argmax(axis=1) != Y.argmax(axis=1)).astype(float)
            metrics["accuracy"] = float(1.0 - wrong.mean())
            metrics["loss"] = float(-np.mean(np.sum(Y * np.log(np.clip(out, 1e-300, None)), axis=1)))
            errors = wrong
        else:
            diff = out - Y
            errors = np.mean(np.abs(diff), axis=1)
            mse = float(np.mean(diff * diff))
            metrics["loss"] = mse
            metrics["rmse"] = float(np.sqrt(mse))
            target_std = np.maximum(Y.std(axis=0), NDEI_FLOOR)
            per_output = np.sqrt(np.mean(diff * diff, axis=0)) / target_std
            metrics["ndei"] = float(per_output.mean())
        return trace, errors

    def _admit(self, batch: StreamBatch, outputs: np.ndarray) -> None:
        rows = outputs if self.classification else [None] * len(batch)
        for x, y, row in zip(batch.X, batch.Y, rows):
            self.memory.observe(x, y, row)

    # -- train phase -----------------------------------------------------

    def _hidden_rates(self, trace, Y) -> list[float]:
        # the top hidden layer feeds the head directly and always trains
        base = self.config.learning_rate
        if self.config.ablation.disable_soft_forgetting or len(Y) < 2:
            return [base] * len(trace.hidden)
        rates = learning_rates(layer_scores(trace.hidden[:-1], Y), max_rate=base)
        return [float(r) for r in rates] + [base]

    def _train_samples(self, X, Y, rates, events, observe: bool, phase: str) -> None:
        net = self.net
        allow_prune = not self.config.ablation.disable_node_pruning
        rates = np.asarray(rates, dtype=float)
        for i, (x, y) in enumerate(zip(X, Y)):
            event = adapt_width(net, self.significance, x, y, allow_prune=allow_prune, observe=observe)
            if event in (GROW, PRUNE):
                events.append({"type": event, "phase": phase, "sample": i, "width": net.widths[-1]})
            net.sgd_sample(x, y, rates)

    def process_batch(self, batch: StreamBatch) -> BatchMetrics:
        start = time.perf_counter()
        cfg = self.config
        net = self.net
        if batch.X.shape[1] != net.input_dim or batch.Y.shape[1] != net.output_dim:
            raise BatchError(batch.index, ValueError("batch dimensions do not match the learner"))
        metrics: dict = {}
        events: list[dict] = []
        try:
            trace, errors = self._test(batch, metrics)
            if not cfg.ablation.disable_adaptive_memory:
                self._admit(batch, trace.output)

            if cfg.ablation.disable_layer_growing:
                state = STABLE
            else:
                state = self.detector.evaluate(errors)
            hidden_rates = self._hidden_rates(trace, batch.Y)
            self.significance.begin_batch()

            if state == DRIFT:
                buffered = self.detector.take_warning_buffer()
                net.add_hidden_layer(1)
                events.append({"type": "layer", "depth": net.depth})
                self.significance.reset_monitors()
                # the fresh head starts from scratch and gets a faster rate for this pass
                rates = hidden_rates + [cfg.learning_rate, cfg.insertion_head_rate]
                for layer, eta in zip(net.layers, rates):
                    layer.eta = eta
                if cfg.ablation.disable_adaptive_memory:
                    Xr, Yr = replay_set(AdaptiveMemory(net.input_dim), buffered)
                else:
                    Xr, Yr = replay_set(self.memory, buffered)
                if len(Xr):
                    self._train_samples(Xr, Yr, rates, events, observe=False, phase="replay")
                self._train_samples(batch.X, batch.Y, rates, events, observe=True, phase="batch")
            elif state == WARNING:
                self.detector.accumulate_warning(batch)
            else:
                rates = hidden_rates + [cfg.learning_rate]
                for layer, eta in zip(net.layers, rates):
                    layer.eta = eta
                self._train_samples(batch.X, batch.Y, rates, events, observe=True, phase="batch")
            if not np.all(np.isfinite(net.packed()[0])):
                raise NumericError("non-finite parameters after training")
            if not np.all(np.isfinite(self.significance.input_stats.mu)):
                raise NumericError("non-finite input statistics")
        except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise BatchError(batch.index, exc) from exc
        self.batches_seen += 1
        return BatchMetrics(
            batch_index=batch.index,
            samples=len(batch),
            loss=metrics["loss"],
            layer_count=net.depth,
            node_counts=net.widths,
            param_count=net.param_count(),
            drift_state=state,
            accuracy=metrics.get("accuracy"),
            rmse=metrics.get("rmse"),
            ndei=metrics.get("ndei"),
            memory_size=len(self.memory),
            events=events,
            wall_time=time.perf_counter() - start,
        )


def _mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def summarize(series: list[BatchMetrics], mode: str, runtime: float | None = None) -> dict:
    summary: dict = {"summary": True, "batches": len(series), "mode": mode}
    if mode == CLASSIFICATION:
        summary["accuracy_mean"], summary["accuracy_std"] = _mean_std([m.accuracy for m in series])
    else:
        summary["rmse_mean"], summary["rmse_std"] = _mean_std([m.rmse for m in series])
        summary["ndei_mean"], summary["ndei_std"] = _mean_std([m.ndei for m in series])
    summary["layers_mean"], summary["layers_std"] = _mean_std([m.layer_count for m in series])
    summary["nodes_mean"], summary["nodes_std"] = _mean_std([sum(m.node_counts) for m in series])
    summary["params_mean"], summary["params_std"] = _mean_std([m.param_count for m in series])
    summary["final_layers"] = series[-1].layer_count
    summary["final_nodes"] = series[-1].node_counts
    counts = {"grow": 0, "prune": 0, "layer": 0}
    for m in series:
        for ev in m.events:
            counts[ev["type"]] += 1
    summary["events"] = counts
    if runtime is not None:
        summary["runtime"] = runtime
    return summary


@dataclass
class RunResult:
    series: list[BatchMetrics]
    summary: dict
    learner: Learner

    def records(self, include_timing: bool = False) -> list[dict]:
        out = [m.record(include_timing) for m in self.series]
        summary = dict(self.summary)
        if not include_timing:
            summary.pop("runtime", None)
        out.append(summary)
        return out


def run_prequential(stream, config: ExperimentConfig | None = None, sink=None) -> RunResult:
    """Process every batch of ``stream`` in order.

    ``sink``, if given, is a writable text file that receives one JSON line
    per batch followed by the summary line.
    """
    config = (config or ExperimentConfig()).validate()
    stream = list(stream)
    if not stream:
        raise ValueError("stream is empty")
    first = stream[0]
    learner = Learner(first.X.shape[1], first.Y.shape[1], config)
    series = []
    start = time.perf_counter()
    for batch in stream:
        metrics = learner.process_batch(batch)
        series.append(metrics)
        if sink is not None:
            sink.write(json.dumps(metrics.record(config.include_timing)) + "\n")
    runtime = time.perf_counter() - start
    summary = summarize(series, config.mode, runtime)
    if sink is not None:
        out = dict(summary)
        if not config.include_timing:
            out.pop("runtime")
        sink.write(json.dumps(out) + "\n")
    return RunResult(series, summary, learner)
