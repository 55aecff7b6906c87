import json

import numpy as np
import pytest

from evonet.network import EvolvingNetwork
from evonet.streams import (CsvStreamConfig, RegressionConfig, SeaConfig, StreamFormatError, concept_boundaries,
                            generate_drifting_regression, generate_sea, ingest_csv, normalize_batches,
                            regression_targets, scale_targets, sea_arrays, sea_labels, write_csv, write_metadata)


def test_sea_rule_examples():
    assert sea_labels([[1, 1, 9.0], [1, 1, 0.0]], 8.0).tolist() == [1, 1]
    assert sea_labels([[5, 5, 3.0]], 8.0).tolist() == [0]


@pytest.mark.parametrize("theta", [7.0, 8.0, 9.0, 9.5])
def test_sea_class_rate_matches_geometry(theta):
    cfg = SeaConfig((theta,), 10_000, noise_rate=0.0, seed=4)
    _, labels, _ = sea_arrays(cfg)
    # area of the triangle x1 + x2 <= theta inside the 10 x 10 square
    assert labels.mean() == pytest.approx(theta ** 2 / 200, abs=0.015)


def test_sea_shape_noise_and_determinism():
    cfg = SeaConfig(samples_per_concept=2000, batch_size=500, seed=1)
    a, b = generate_sea(cfg), generate_sea(cfg)
    assert len(a) == 16 and all(len(x) == 500 for x in a)
    assert all(np.array_equal(x.X, y.X) and np.array_equal(x.Y, y.Y) for x, y in zip(a, b))
    X = np.vstack([x.X for x in a])
    assert X.min() >= 0 and X.max() <= 10
    Y = np.vstack([x.Y for x in a])
    np.testing.assert_array_equal(Y.sum(axis=1), 1.0)
    X, labels, concept = sea_arrays(cfg)
    clean = np.array([sea_labels(X[concept == c], t) for c, t in enumerate(cfg.concept_thresholds)], dtype=object)
    flipped = np.mean(np.concatenate(clean) != labels)
    assert flipped == pytest.approx(0.1, abs=0.015)
    assert a[0].meta["concepts"] == [0] and a[4].meta["concepts"] == [1]


def test_regression_formula_without_noise():
    cfg = RegressionConfig((3.0,), 200, noise_std=0.0, outputs=2, batch_size=50)
    batches = generate_drifting_regression(cfg)
    X = np.vstack([b.X for b in batches])
    Y = np.vstack([b.Y for b in batches])
    np.testing.assert_array_equal(Y[:, 0], np.sin(3.0 * X[:, 0]) + 0.5 * X[:, 1])
    np.testing.assert_array_equal(Y[:, 1], np.cos(3.0 * X[:, 0]) + 0.5 * X[:, 1])
    np.testing.assert_array_equal(regression_targets(X, 3.0), Y[:, :1])


def test_regression_determinism_and_boundaries():
    a, b = generate_drifting_regression(), generate_drifting_regression()
    assert len(a) == 60
    assert all(np.array_equal(x.Y, y.Y) for x, y in zip(a, b))
    assert concept_boundaries(10_000, 3) == [0, 10_000, 20_000]


def test_frozen_model_error_rises_after_switch():
    cfg = RegressionConfig((1.0, 2.0), 3000, batch_size=500, seed=2)
    batches = scale_targets(generate_drifting_regression(cfg))
    net = EvolvingNetwork.create(2, 1, "regression", seed=0)
    for _ in range(3):
        for b in batches[:6]:
            for x, y in zip(b.X, b.Y):
                net.sgd_sample(x, y, np.array([0.1, 0.1]))

    def mse(b):
        return float(np.mean((net.predict(b.X) - b.Y) ** 2))

    before = np.mean([mse(b) for b in batches[:6]])
    after = np.mean([mse(b) for b in batches[6:]])
    assert after > 2 * before


def test_csv_round_trip(tmp_path):
    cfg = SeaConfig(samples_per_concept=150, batch_size=100, seed=3)
    X, labels, _ = sea_arrays(cfg)
    path = tmp_path / "sea.csv"
    write_csv(path, X, labels)
    back = ingest_csv(CsvStreamConfig(str(path), ["label"], "none", 100))
    ref = generate_sea(cfg)
    assert [len(b) for b in back] == [len(b) for b in ref]
    for a, b in zip(back, ref):
        assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)


def test_csv_batch_partition(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,y\n1,2,0\n3,4,1\n5,6,0\n")
    assert [len(b) for b in ingest_csv(CsvStreamConfig(str(path), ["y"], "none", 2))] == [2, 1]


def test_csv_minmax_uses_first_batch_only(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,y\n2,0\n4,1\n100,0\n-50,1\n")
    batches = ingest_csv(CsvStreamConfig(str(path), ["y"], "minmax", 2))
    np.testing.assert_array_equal(batches[0].X[:, 0], [0.0, 1.0])
    np.testing.assert_array_equal(batches[1].X[:, 0], [49.0, -26.0])


def test_normalization_ignores_later_batches():
    rng = np.random.default_rng(0)
    raw = generate_sea(SeaConfig(samples_per_concept=400, batch_size=100, seed=0))
    changed = list(raw)
    changed[-1] = type(raw[-1])(raw[-1].X * 50 + rng.normal(size=raw[-1].X.shape), raw[-1].Y, raw[-1].index)
    for kind in ("minmax", "zscore"):
        a, b = normalize_batches(raw, kind), normalize_batches(changed, kind)
        assert all(np.array_equal(x.X, y.X) for x, y in zip(a[:-1], b[:-1]))
    z = normalize_batches(raw, "zscore")[0].X
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-12)


def test_target_scaling_first_batch():
    batches = scale_targets(generate_drifting_regression(RegressionConfig(batch_size=500)))
    assert batches[0].Y.min() == 0.0 and batches[0].Y.max() == 1.0
    assert scale_targets(batches, "none")[3] is batches[3]


@pytest.mark.parametrize("body, message", [
    ("a,y\n1,0\nfoo,1\n", ":3:"),
    ("a,y\n1,0\n2\n", ":3:"),
    ("a,y\n1,0\n2,cat\n", ":3:"),
])
def test_csv_errors_carry_line_numbers(tmp_path, body, message):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(StreamFormatError, match=message):
        ingest_csv(CsvStreamConfig(str(path), ["y"], "none", 10))


def test_csv_missing_target_column(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(StreamFormatError):
        ingest_csv(CsvStreamConfig(str(path), ["y"], "none", 10))


def test_csv_regression_targets(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, [[0.1], [0.2]], [[1.5, -2.0], [0.25, 3.0]], target_names=("u", "v"))
    (batch,) = ingest_csv(CsvStreamConfig(str(path), ["u", "v"], "none", 10, mode="regression"))
    np.testing.assert_array_equal(batch.Y, [[1.5, -2.0], [0.25, 3.0]])


def test_metadata_sidecar(tmp_path):
    side = write_metadata(tmp_path / "s.csv", {"drift_points": [5, 10]})
    assert side.name == "s.csv.meta.json"
    assert json.loads(side.read_text())["drift_points"] == [5, 10]
