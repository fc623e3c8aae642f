import math

import numpy as np
import pytest

from wavenilm.metrics import AccuracyReport, estimated_accuracy, mean_report


def oracle(pred, truth):
    """Direct summation, scalar loops only."""
    err = 0.0
    total = 0.0
    flat_p = pred.reshape(-1, pred.shape[-1])
    flat_t = truth.reshape(-1, truth.shape[-1])
    for t in range(flat_p.shape[0]):
        for k in range(flat_p.shape[1]):
            err += abs(flat_p[t, k] - flat_t[t, k])
            total += flat_t[t, k]
    return 1.0 - err / (2.0 * total)


def test_perfect_prediction_scores_one():
    truth = np.array([[1.0, 2.0], [3.0, 0.5]])
    report = estimated_accuracy(truth.copy(), truth)
    assert report.estimated_accuracy_total == 1.0
    assert report.absolute_error_sum == 0.0


def test_known_small_case():
    truth = np.array([[2.0], [2.0]])
    pred = np.array([[1.0], [2.0]])
    report = estimated_accuracy(pred, truth)
    assert report.estimated_accuracy_total == pytest.approx(0.875, abs=1e-15)


def test_all_zero_prediction_scores_half():
    truth = np.abs(np.random.default_rng(3).normal(size=(50, 4))) + 0.01
    report = estimated_accuracy(np.zeros_like(truth), truth)
    assert report.estimated_accuracy_total == pytest.approx(0.5, abs=1e-12)


def test_matches_direct_summation_oracle():
    rng = np.random.default_rng(99)
    for _ in range(100):
        t = rng.integers(1, 20)
        k = rng.integers(1, 5)
        truth = np.abs(rng.normal(size=(t, k))) + 1e-3
        pred = rng.normal(size=(t, k))
        report = estimated_accuracy(pred, truth)
        assert abs(report.estimated_accuracy_total - oracle(pred, truth)) < 1e-12


def test_never_exceeds_one_and_equality_only_when_exact():
    rng = np.random.default_rng(7)
    for _ in range(50):
        truth = np.abs(rng.normal(size=(30, 3))) + 1e-3
        pred = truth + rng.normal(scale=0.1, size=truth.shape)
        report = estimated_accuracy(pred, truth)
        assert report.estimated_accuracy_total < 1.0
    exact = estimated_accuracy(truth, truth)
    assert exact.estimated_accuracy_total == 1.0


def test_scale_equivariance():
    rng = np.random.default_rng(11)
    truth = np.abs(rng.normal(size=(40, 2))) + 1e-3
    pred = np.abs(rng.normal(size=(40, 2)))
    base = estimated_accuracy(pred, truth).estimated_accuracy_total
    for c in (1e-3, 7.0, 4096.0):
        scaled = estimated_accuracy(pred * c, truth * c).estimated_accuracy_total
        assert scaled == pytest.approx(base, abs=1e-12)


def test_total_is_error_weighted_combination_of_per_load_sums():
    rng = np.random.default_rng(13)
    truth = np.abs(rng.normal(size=(25, 3))) + 1e-3
    pred = rng.normal(size=(25, 3))
    report = estimated_accuracy(pred, truth, ["a", "b", "c"])
    errs = np.abs(pred - truth).sum(axis=0)
    truths = truth.sum(axis=0)
    for i, name in enumerate(("a", "b", "c")):
        assert report.per_appliance[name] == pytest.approx(
            1.0 - errs[i] / (2.0 * truths[i]), abs=1e-12)
    assert report.estimated_accuracy_total == pytest.approx(
        1.0 - errs.sum() / (2.0 * truths.sum()), abs=1e-12)


def test_zero_truth_rejected():
    with pytest.raises(ValueError, match="zero"):
        estimated_accuracy(np.ones((5, 2)), np.zeros((5, 2)))


def test_negative_truth_rejected():
    truth = np.ones((5, 2))
    truth[0, 0] = -1.0
    with pytest.raises(ValueError, match="nonnegative"):
        estimated_accuracy(np.ones((5, 2)), truth)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape"):
        estimated_accuracy(np.ones((5, 2)), np.ones((5, 3)))


def test_single_zero_truth_load_reports_nan():
    truth = np.ones((10, 2))
    truth[:, 1] = 0.0
    report = estimated_accuracy(truth.copy(), truth, ["on", "off"])
    assert report.per_appliance["on"] == 1.0
    assert math.isnan(report.per_appliance["off"])


def test_text_and_csv_serialization_round_trip():
    report = estimated_accuracy(
        np.array([[1.0, 2.0], [2.0, 1.0]]),
        np.array([[1.5, 2.0], [2.0, 1.5]]),
        ["dryer", "oven"])
    text = report.to_text()
    assert "estimated_accuracy_total" in text
    assert "per_appliance.dryer" in text
    header = report.csv_header().split(",")
    row = report.to_csv_row().split(",")
    assert len(header) == len(row)
    parsed = dict(zip(header, (float(v) for v in row)))
    assert parsed["estimated_accuracy_total"] == report.estimated_accuracy_total
    assert parsed["acc_oven"] == report.per_appliance["oven"]


def test_mean_report_is_arithmetic_mean():
    r1 = AccuracyReport(0.9, {"a": 0.8}, 10.0, 100.0)
    r2 = AccuracyReport(0.7, {"a": 0.6}, 30.0, 100.0)
    mean = mean_report([r1, r2])
    assert mean.estimated_accuracy_total == pytest.approx(0.8, abs=1e-15)
    assert mean.per_appliance["a"] == pytest.approx(0.7, abs=1e-15)
    assert mean.absolute_error_sum == 40.0
