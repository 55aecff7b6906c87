"""Soft forgetting: per-layer learning rates from activation/target correlation."""

from __future__ import annotations

import math

import numpy as np

MAX_RATE = 0.01


def pearson(h, y) -> float:
    """Pearson correlation; 0 when either column has zero spread."""
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    if h.shape != y.shape or h.ndim != 1:
        raise ValueError("pearson needs two equal-length vectors")
    if h.size < 2:
        raise ValueError("pearson needs at least two observations")
    if np.ptp(h) == 0.0 or np.ptp(y) == 0.0:
        return 0.0
    hc = h - h.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(hc @ hc) * float(yc @ yc))
    if denom == 0.0:
        return 0.0
    return float(np.clip((hc @ yc) / denom, -1.0, 1.0))


def correlation_matrix(H, Y) -> np.ndarray:
    """|Pearson| between every unit column of ``H`` and target column of ``Y``."""
    H = np.asarray(H, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if H.shape[0] < 2 or H.shape[0] != Y.shape[0]:
        raise ValueError("need at least two aligned rows")
    Hc = H - H.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    # exact test for constant columns; centering leaves rounding residue
    hn = np.where(np.ptp(H, axis=0) > 0.0, np.sqrt(np.sum(Hc * Hc, axis=0)), 0.0)
    yn = np.where(np.ptp(Y, axis=0) > 0.0, np.sqrt(np.sum(Yc * Yc, axis=0)), 0.0)
    denom = np.outer(hn, yn)
    cov = Hc.T @ Yc
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0.0, cov / denom, 0.0)
    return np.clip(np.abs(corr), 0.0, 1.0)


def layer_scores(hidden, Y) -> np.ndarray:
    """Relevance score per hidden layer: mean |corr| over (unit, output) pairs.

    ``hidden`` is the list of per-layer activation matrices of a forward trace.
    """
    return np.array([correlation_matrix(H, Y).mean() for H in hidden])


def learning_rates(scores, max_rate: float = MAX_RATE) -> np.ndarray:
    """``max_rate * exp(1 - 1/RS)``, 0 for RS = 0; stays in [0, max_rate]."""
    scores = np.asarray(scores, dtype=float)
    rates = np.zeros_like(scores)
    live = scores > 0.0
    rates[live] = max_rate * np.exp(1.0 - 1.0 / scores[live])
    return np.clip(rates, 0.0, max_rate)
