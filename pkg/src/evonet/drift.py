"""Hoeffding-bound drift detection over the prequential error record.

The record holds one entry per tested sample: a 0/1 misclassification flag,
or an absolute prediction error in regression.  On every evaluation the
record is split at a switching point into a prefix ``B`` and a suffix ``C``;
a rise of the suffix mean over the prefix mean beyond the Hoeffding radius
at ``alpha_drift`` signals drift, beyond the radius at ``alpha_warning``
signals a warning.

The switching point is the cut whose prefix upper confidence bound
``mean(B) + eps(cut)`` is smallest, i.e. the point after which the error
level has visibly left its best regime.
"""

from __future__ import annotations

import math

import numpy as np

STABLE = "stable"
WARNING = "warning"
DRIFT = "drift"

ALPHA_DRIFT = 1e-4
ALPHA_WARNING = 5e-4
MIN_WINDOW = 30
MIN_BATCHES = 2
RANGE_FLOOR = 1e-12


class ContractError(RuntimeError):
    """Operation called in a state that does not permit it."""


def hoeffding_bound(cut, alpha: float, value_range: float = 1.0):
    """Hoeffding radius ``(b - a) * sqrt(ln(1/alpha) / (2 * cut))``.

    The general form ``(b-a) sqrt(size / (2 * size * cut) * ln(1/alpha))``
    reduces to this since ``size`` cancels.  ``cut`` may be an array.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if np.any(np.asarray(cut) < 1):
        raise ValueError("cut must be at least 1")
    return value_range * np.sqrt(math.log(1.0 / alpha) / (2.0 * np.asarray(cut, dtype=float)))


def find_switching_point(record, alpha: float = ALPHA_DRIFT, value_range: float = 1.0,
                         min_window: int = MIN_WINDOW):
    """Return the switching cut (prefix length) or ``None``.

    Candidate cuts run from ``min_window`` to ``len(record) - min_window``.
    The cut minimising the prefix upper bound is kept only if the suffix
    mean is above the prefix mean, since only an increase is a candidate
    drift.
    """
    record = np.asarray(record, dtype=float)
    size = record.size
    if size < 2 * min_window:
        return None
    csum = np.cumsum(record)
    cuts = np.arange(min_window, size - min_window + 1)
    prefix_mean = csum[cuts - 1] / cuts
    upper = prefix_mean + hoeffding_bound(cuts, alpha, value_range)
    best = int(np.argmin(upper))
    cut = int(cuts[best])
    suffix_mean = (csum[-1] - csum[cut - 1]) / (size - cut)
    if suffix_mean <= prefix_mean[best]:
        return None
    return cut


class DriftDetector:
    """Three-state (stable / warning / drift) detector with a warning buffer."""

    def __init__(self, mode: str = "classification", alpha_drift: float = ALPHA_DRIFT,
                 alpha_warning: float = ALPHA_WARNING, min_window: int = MIN_WINDOW,
                 min_batches: int = MIN_BATCHES):
        if not alpha_drift < alpha_warning:
            raise ValueError("alpha_drift must be smaller than alpha_warning")
        self.mode = mode
        self.alpha_drift = alpha_drift
        self.alpha_warning = alpha_warning
        self.min_window = min_window
        self.min_batches = min_batches
        self.state = STABLE
        self.warning_buffer: list = []
        self.last_cut = None
        self._reset_record()

    def _reset_record(self) -> None:
        self._chunks: list[np.ndarray] = []
        self._batches = 0
        self._lo = math.inf
        self._hi = -math.inf

    @property
    def record(self) -> np.ndarray:
        return np.concatenate(self._chunks) if self._chunks else np.empty(0)

    @property
    def value_range(self) -> float:
        if self.mode == "classification":
            return 1.0
        if not self._chunks:
            return RANGE_FLOOR
        return max(self._hi - self._lo, RANGE_FLOOR)

    def evaluate(self, new_entries) -> str:
        entries = np.asarray(new_entries, dtype=float).ravel()
        if entries.size:
            self._chunks.append(entries)
            self._batches += 1
            self._lo = min(self._lo, float(entries.min()))
            self._hi = max(self._hi, float(entries.max()))
        record = self.record
        self.last_cut = None
        status = STABLE
        if self._batches >= self.min_batches:
            spread = self.value_range
            cut = find_switching_point(record, self.alpha_drift, spread, self.min_window)
            if cut is not None:
                self.last_cut = cut
                prefix = record[:cut].mean()
                suffix = record[cut:].mean()
                # two-sample radius: effective count 1 / (1/n_B + 1/n_C)
                n_eff = cut * (record.size - cut) / record.size
                gap = suffix - prefix
                if gap >= hoeffding_bound(n_eff, self.alpha_drift, spread):
                    status = DRIFT
                elif gap >= hoeffding_bound(n_eff, self.alpha_warning, spread):
                    status = WARNING
        if status == DRIFT:
            self._reset_record()
            self.state = STABLE
        else:
            if status == STABLE and self.state == WARNING:
                self.warning_buffer = []
            self.state = status
        return status

    def accumulate_warning(self, batch) -> None:
        if self.state != WARNING:
            raise ContractError("warning buffer only accumulates in the warning state")
        self.warning_buffer.append(batch)

    def take_warning_buffer(self) -> list:
        buffered, self.warning_buffer = self.warning_buffer, []
        return buffered

    def reset(self) -> None:
        self._reset_record()
        self.state = STABLE
        self.warning_buffer = []
