import math

import numpy as np
import pytest

from evonet.drift import (DRIFT, STABLE, WARNING, ContractError, DriftDetector, find_switching_point,
                          hoeffding_bound)
from evonet.streams import StreamBatch


def test_bound_value():
    assert hoeffding_bound(200, 1e-4) == pytest.approx(math.sqrt(math.log(1e4) / 400), rel=1e-12)
    assert hoeffding_bound(200, 1e-4) == pytest.approx(0.15174, abs=1e-5)


def test_bound_monotonicity():
    assert hoeffding_bound(10, 1 - 1e-12) < 1e-5
    cuts = [1, 2, 4, 8, 16, 32]
    eps = [hoeffding_bound(c, 1e-3) for c in cuts]
    assert all(a > b for a, b in zip(eps, eps[1:]))
    alphas = [1e-5, 1e-4, 1e-3, 0.1, 0.5]
    eps = [hoeffding_bound(50, a) for a in alphas]
    assert all(a > b for a, b in zip(eps, eps[1:]))
    assert hoeffding_bound(50, 1e-4, 3.0) == pytest.approx(3 * hoeffding_bound(50, 1e-4))


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 2.0])
def test_bound_rejects_bad_alpha(alpha):
    with pytest.raises(ValueError):
        hoeffding_bound(10, alpha)


def test_switching_point_examples():
    assert find_switching_point(np.zeros(400)) is None
    assert find_switching_point(np.ones(20)) is None
    cut = find_switching_point(np.r_[np.zeros(200), np.ones(200)])
    assert abs(cut - 200) <= 40


def test_switching_point_matches_exhaustive_scan():
    rng = np.random.default_rng(3)
    for _ in range(20):
        rec = np.r_[rng.random(150) < 0.1, rng.random(120) < 0.6].astype(float)
        best, best_val = None, math.inf
        for cut in range(30, len(rec) - 30 + 1):
            val = rec[:cut].mean() + math.sqrt(math.log(1e4) / (2 * cut))
            if val < best_val:
                best, best_val = cut, val
        expected = best if rec[best:].mean() > rec[:best].mean() else None
        assert find_switching_point(rec) == expected


def _run(detector, entries, chunk=100):
    states = []
    for start in range(0, len(entries), chunk):
        states.append(detector.evaluate(entries[start:start + chunk]))
    return states


def test_step_up_is_detected_quickly():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        entries = np.r_[rng.random(500) < 0.1, rng.random(500) < 0.5].astype(float)
        states = _run(DriftDetector(), entries, chunk=50)
        # chunk k covers entries [50k, 50k + 50); the step starts in chunk 10
        hits += DRIFT in states[10:20]
    assert hits >= 90


def test_stationary_stream_rarely_alarms():
    alarms = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        entries = (rng.random(10_000) < 0.2).astype(float)
        alarms += DRIFT in _run(DriftDetector(), entries)
    assert alarms < 1


def test_improvement_is_not_drift():
    rng = np.random.default_rng(7)
    entries = np.r_[rng.random(500) < 0.5, rng.random(500) < 0.1].astype(float)
    assert DRIFT not in _run(DriftDetector(), entries, chunk=50)


def test_single_batch_never_evaluates():
    det = DriftDetector()
    assert det.evaluate(np.r_[np.zeros(500), np.ones(500)]) == STABLE


def test_drift_resets_record():
    det = DriftDetector()
    det.evaluate(np.zeros(300))
    assert det.evaluate(np.ones(300)) == DRIFT
    assert det.record.size == 0 and det.state == STABLE


def _warning_detector():
    # a gap that clears the warning radius but not the drift radius
    det = DriftDetector(alpha_drift=1e-12, alpha_warning=0.4)
    det.evaluate(np.zeros(200))
    rng = np.random.default_rng(0)
    state = det.evaluate((rng.random(200) < 0.3).astype(float))
    assert state == WARNING
    return det


def test_warning_buffer_lifecycle():
    det = _warning_detector()
    a = StreamBatch(np.zeros((2, 1)), np.zeros((2, 1)), 0)
    b = StreamBatch(np.ones((2, 1)), np.ones((2, 1)), 1)
    det.accumulate_warning(a)
    det.accumulate_warning(b)
    assert det.take_warning_buffer() == [a, b]
    assert det.take_warning_buffer() == []

    det = _warning_detector()
    det.accumulate_warning(a)
    det.alpha_warning = 1e-11
    assert det.evaluate(np.zeros(5000)) == STABLE
    assert det.warning_buffer == []


def test_accumulate_outside_warning_is_a_contract_error():
    with pytest.raises(ContractError):
        DriftDetector().accumulate_warning(object())


def test_regression_range_tracks_errors():
    det = DriftDetector("regression")
    det.evaluate([0.5, 2.0, 1.0])
    assert det.value_range == pytest.approx(1.5)
    det.evaluate([0.1])
    assert det.value_range == pytest.approx(1.9)
    flat = DriftDetector("regression")
    flat.evaluate(np.full(100, 0.3))
    assert flat.value_range == 1e-12


def test_alphas_must_be_ordered():
    with pytest.raises(ValueError):
        DriftDetector(alpha_drift=0.01, alpha_warning=0.001)
