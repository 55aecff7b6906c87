"""Adaptive replay memory.

Samples are kept when they are informative but not outliers: their squared
Mahalanobis distance to the running center falls between the 0.99 and 0.999
chi-square quantiles.  In classification, samples the network is unsure
about (low top-two softmax ratio) are kept as well.  The stored set is
replayed when a new hidden layer is inserted.

The center and inverse covariance are maintained recursively; after a
one-off seed from the first ``n + 1`` samples the inverse is updated with
the Sherman-Morrison identity and never re-inverted.  The covariance uses
population (1/count) normalization.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.stats import chi2

from . import _kernels
from .network import confidence_ratio

LOWER_QUANTILE = 0.99
UPPER_QUANTILE = 0.999
DELTA = 0.55
SEED_REG = 1e-2
SINGULAR_TOL = 1e-12


class MemoryNotReady(RuntimeError):
    """Statistics have not absorbed enough samples yet."""


def chi_square_thresholds(p: int, lower: float = LOWER_QUANTILE, upper: float = UPPER_QUANTILE):
    if p < 1:
        raise ValueError("degrees of freedom must be >= 1")
    return float(chi2.ppf(lower, p)), float(chi2.ppf(upper, p))


class AdaptiveMemory:
    def __init__(self, n: int, delta: float = DELTA, cap: int | None = None,
                 use_confidence: bool = True, reg: float = SEED_REG):
        self.n = n
        self.delta = delta
        self.cap = cap
        self.use_confidence = use_confidence
        self.reg = reg
        self.t1, self.t2 = chi_square_thresholds(n)
        self.center = np.zeros(n)
        self.inv_cov = np.eye(n) / reg
        self.count = 0
        self._seeded = False
        self._recent: deque = deque(maxlen=2 * (n + 1))
        self.stored_x: deque = deque(maxlen=cap)
        self.stored_y: deque = deque(maxlen=cap)

    def __len__(self) -> int:
        return len(self.stored_x)

    @property
    def ready(self) -> bool:
        return self._seeded

    def _seed(self, window) -> None:
        data = np.asarray(window)
        cov = np.cov(data, rowvar=False, bias=True).reshape(self.n, self.n)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            cov = cov + self.reg * np.eye(self.n)
        self.inv_cov = np.linalg.inv(cov)
        self._seeded = True

    def update_stats(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self._recent.append(x.copy())
        self.count += 1
        if not self._seeded:
            self.center += (x - self.center) / self.count
            if self.count >= self.n + 1:
                self._seed(self._recent)
            return
        # cov_k = (k-1)/k * (cov_{k-1} + d d^T / k), inverted by Sherman-Morrison
        denom = _kernels.sherman_morrison_step(self.center, self.inv_cov, x, float(self.count))
        if not (denom >= SINGULAR_TOL and np.isfinite(denom)):
            self._seed(self._recent)

    def mahalanobis_sq(self, x) -> float:
        if not self._seeded:
            raise MemoryNotReady(f"need {self.n + 1} samples before distances are defined")
        return _kernels.mahalanobis_sq(self.center, self.inv_cov, np.asarray(x, dtype=float))

    def admits(self, x, output_row=None) -> bool:
        """Admission rule only, without storing anything."""
        if self.use_confidence and output_row is not None and confidence_ratio(output_row) < self.delta:
            return True
        dist = self.mahalanobis_sq(x)
        return self.t1 <= dist <= self.t2

    def consider_sample(self, x, y, output_row=None) -> bool:
        """Store ``(x, y)`` if it passes the admission rule.

        ``output_row`` is the softmax output for ``x``; pass ``None`` in
        regression, where only the Mahalanobis band applies.
        """
        if not self.admits(x, output_row):
            return False
        self.stored_x.append(np.array(x, dtype=float))
        self.stored_y.append(np.array(y, dtype=float))
        return True

    def observe(self, x, y, output_row=None) -> bool:
        """Test ``x`` against the current statistics, then absorb it."""
        admitted = self.consider_sample(x, y, output_row) if self._seeded else False
        self.update_stats(x)
        return admitted

    def samples(self):
        if not self.stored_x:
            return np.empty((0, self.n)), None
        return np.array(self.stored_x), np.array(self.stored_y)


def replay_set(memory: AdaptiveMemory, warning_buffer=()):
    """Memory samples followed by warning-buffer samples, in arrival order.

    ``warning_buffer`` is a sequence of batches with ``X``/``Y`` attributes.
    Returns ``(X, Y)``; both are empty arrays when there is nothing to replay.
    """
    xs, ys = [], []
    mx, my = memory.samples()
    if len(mx):
        xs.append(mx)
        ys.append(my)
    for batch in warning_buffer:
        xs.append(np.asarray(batch.X, dtype=float))
        ys.append(np.asarray(batch.Y, dtype=float))
    if not xs:
        return np.empty((0, memory.n)), np.empty((0, 0))
    return np.vstack(xs), np.vstack(ys)
