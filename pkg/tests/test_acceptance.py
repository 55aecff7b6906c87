"""End-to-end acceptance checks.

Each test prints one ``CRITERION n: PASS|FAIL`` line and collects it for the
terminal summary. Expensive runs are cached and shared between criteria.
"""
import time
from functools import lru_cache

import numpy as np

from conftest import ACCEPTANCE_LINES, random_net
from oracles import monte_carlo_output, precise_central_difference
from evonet import cli
from evonet.config import AblationSwitches, ExperimentConfig, StreamSpec, build_stream
from evonet.drift import DRIFT, DriftDetector
from evonet.harness import run_prequential
from evonet.memory import AdaptiveMemory
from evonet.significance import expected_output

SEA_SEEDS = range(5)
REACT_SEEDS = range(10)
ABLATIONS = ["disable_layer_growing", "disable_node_pruning", "disable_adaptive_memory",
             "disable_soft_forgetting"]


def report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@lru_cache(maxsize=None)
def sea_run(seed, ablation=None):
    cfg = ExperimentConfig(seed=seed)
    if ablation:
        cfg = cfg.with_overrides(ablation=AblationSwitches(**{ablation: True}))
    start = time.perf_counter()
    result = run_prequential(build_stream(cfg), cfg)
    return result, time.perf_counter() - start


@lru_cache(maxsize=None)
def regression_run(seed):
    cfg = ExperimentConfig(seed=seed, mode="regression", stream=StreamSpec(kind="regression"))
    return run_prequential(build_stream(cfg), cfg), cfg.stream.size


def layers_added_near(series, boundary_batches, window):
    hits = 0
    for b in boundary_batches:
        before = series[b - 1].layer_count
        after = series[min(b + window, len(series)) - 1].layer_count
        hits += after > before
    return hits


def test_criterion_1_sea_reproduction():
    runs = [sea_run(s) for s in SEA_SEEDS]
    acc = np.mean([r.summary["accuracy_mean"] for r, _ in runs])
    layers = np.mean([r.summary["layers_mean"] for r, _ in runs])
    slowest = max(t for _, t in runs)
    ok = acc >= 0.86 and 1 <= layers <= 4 and slowest < 120
    report(1, ok, f"accuracy {acc:.4f} (>= 0.86), mean layers {layers:.2f} (in [1, 4]), "
                  f"slowest run {slowest:.1f}s (< 120s)")


def test_criterion_2_ablation_direction():
    full = np.mean([sea_run(s)[0].summary["accuracy_mean"] for s in SEA_SEEDS])
    drops = {}
    for name in ABLATIONS:
        ablated = np.mean([sea_run(s, name)[0].summary["accuracy_mean"] for s in SEA_SEEDS])
        drops[name] = 100 * (full - ablated)
    ok = all(d >= -1.0 for d in drops.values()) and max(drops.values()) >= 1.0
    detail = ", ".join(f"{k.removeprefix('disable_')} {v:+.2f}pt" for k, v in drops.items())
    report(2, ok, f"full {full:.4f}; drop vs ablation: {detail}")


def _chunks(detector, entries, size):
    return [detector.evaluate(entries[i:i + size]) for i in range(0, len(entries), size)]


def test_criterion_3_drift_detector():
    caught = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        entries = np.r_[rng.random(500) < 0.1, rng.random(500) < 0.5].astype(float)
        # chunks 10..19 cover entries 500..999
        caught += DRIFT in _chunks(DriftDetector(alpha_drift=1e-4), entries, 50)[10:20]
    alarms = 0
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        entries = (rng.random(10_000) < 0.2).astype(float)
        alarms += DRIFT in _chunks(DriftDetector(alpha_drift=1e-4), entries, 100)
    report(3, caught >= 90 and alarms < 1, f"step detected in {caught}/100 (>= 90), "
                                          f"stationary alarms {alarms}/100 (< 1)")


def test_criterion_4_expected_output_vs_sampling():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(20):
        n, width, m = rng.integers(1, 5), rng.integers(1, 9), rng.integers(1, 3)
        net = random_net(rng, n, [width], m, "regression")
        mu = rng.normal(size=n)
        sigma2 = rng.uniform(0.05, 1.0, size=n)
        analytic = expected_output(net, mu, sigma2)
        mc = monte_carlo_output([net.layers[0].W], [net.layers[0].b], net.head.W, net.head.c, mu, sigma2,
                                seed=k)
        worst = max(worst, float(np.abs(analytic - mc).max()))
    report(4, worst < 0.05, f"max |analytic - Monte Carlo| {worst:.4f} over 20 nets (< 0.05)")


def test_criterion_5_gradients():
    rng = np.random.default_rng(77)
    worst = 0.0
    for mode in ("classification", "regression"):
        for _ in range(50):
            n, m = rng.integers(1, 5), rng.integers(2, 4)
            widths = list(rng.integers(1, 6, size=rng.integers(1, 4)))
            net = random_net(rng, n, widths, m, mode, scale=0.8)
            x = rng.normal(size=n)
            y = np.eye(m)[rng.integers(m)] if mode == "classification" else rng.normal(size=m)
            layer_grads, head_grad, _ = net.gradients(x, y)
            numeric = precise_central_difference([l.W for l in net.layers], [l.b for l in net.layers],
                                                 net.head.W, net.head.c, x, y, mode == "classification")
            analytic = [g for pair in layer_grads for g in pair] + list(head_grad)
            for a, f in zip(analytic, numeric):
                rel = np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-7)
                worst = max(worst, float(rel.max()))
    report(5, worst < 1e-5, f"max relative error {worst:.2e} over 100 nets (< 1e-5)")


def test_criterion_6_memory_admission():
    rng = np.random.default_rng(6)
    mem = AdaptiveMemory(3)
    X = rng.normal(size=(100_000, 3))
    rate = sum(mem.observe(x, [0.0]) for x in X) / len(X)
    report(6, abs(rate - 0.009) <= 0.005, f"admission fraction {rate:.4f} (0.009 +- 0.005)")


def test_criterion_7_structural_reactivity():
    layered = churn = 0
    for seed in REACT_SEEDS:
        result, _ = sea_run(seed)
        boundaries = [50, 100, 150]
        layered += layers_added_near(result.series, boundaries, 10) >= 1
        events = result.summary["events"]
        nodes = {sum(m.node_counts) for m in result.series}
        churn += events["grow"] > 0 and events["prune"] > 0 and len(nodes) > 1
    n = len(REACT_SEEDS)
    ok = layered >= 0.8 * n and churn >= 0.5 * n
    report(7, ok, f"layer added within 10 batches of a boundary in {layered}/{n} seeds (>= 80%), "
                  f"grow and prune observed in {churn}/{n} (>= 50%)")


def test_criterion_8_regression():
    worst, near = 0.0, 0
    for seed in REACT_SEEDS:
        result, size = regression_run(seed)
        per_concept = 10_000 // size
        series = result.series
        third = len(series) - len(series) // 3
        worst = max(worst, float(np.mean([m.ndei for m in series[third:]])))
        near += layers_added_near(series, [per_concept, 2 * per_concept], 5) >= 1
    n = len(REACT_SEEDS)
    ok = worst < 1.0 and near >= 0.7 * n
    report(8, ok, f"worst final-third NDEI {worst:.3f} (< 1.0), "
                  f"layer added within 5 batches of a drift in {near}/{n} seeds (>= 70%)")


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "sea.cfg"
    cfg.write_text("[learner]\nseed = 3\n[stream]\nkind = sea\n")
    outputs = []
    for name in ("a.jsonl", "b.jsonl"):
        out = tmp_path / name
        assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    report(9, outputs[0] == outputs[1], f"two runs of the default SEA stream, {len(outputs[0])} bytes each, "
                                        f"identical={outputs[0] == outputs[1]}")


def test_criterion_10_out_of_scope():
    line = ("CRITERION 10: NOT REPRODUCED (by design) large benchmark datasets are not shipped; "
            "their behaviours are covered by criteria 3-8")
    ACCEPTANCE_LINES.append(line)
    print(line)
