"""Estimated Accuracy: 1 - sum|pred - truth| / (2 * sum truth), totalled
over all loads and time, plus the per-load variant with the load
summation removed. Computed in physical (de-normalized) units by the
evaluation paths."""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AccuracyReport:
    estimated_accuracy_total: float
    per_appliance: dict = field(default_factory=dict)
    absolute_error_sum: float = 0.0
    ground_truth_sum: float = 0.0

    def to_text(self) -> str:
        lines = [
            f"estimated_accuracy_total = {self.estimated_accuracy_total!r}",
            f"absolute_error_sum = {self.absolute_error_sum!r}",
            f"ground_truth_sum = {self.ground_truth_sum!r}",
        ]
        for name, value in self.per_appliance.items():
            lines.append(f"per_appliance.{name} = {value!r}")
        return "\n".join(lines) + "\n"

    def csv_header(self) -> str:
        cols = ["estimated_accuracy_total", "absolute_error_sum", "ground_truth_sum"]
        cols += [f"acc_{name}" for name in self.per_appliance]
        return ",".join(cols)

    def to_csv_row(self) -> str:
        vals = [self.estimated_accuracy_total, self.absolute_error_sum,
                self.ground_truth_sum]
        vals += list(self.per_appliance.values())
        return ",".join(repr(float(v)) for v in vals)


def estimated_accuracy(predictions, truth, load_names=None) -> AccuracyReport:
    """Score disaggregated series against ground truth.

    `predictions` and `truth` share a shape whose last axis indexes
    loads; leading axes (time, windows, ...) are flattened. Truth must be
    nonnegative with a positive total, otherwise the metric is undefined
    and a ValueError is raised. A load whose own truth is identically
    zero gets NaN in the per-load map.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predictions.shape != truth.shape:
        raise ValueError(
            f"prediction shape {predictions.shape} != truth shape {truth.shape}")
    if predictions.ndim == 0:
        raise ValueError("scalar input; expected at least a load axis")
    if np.any(truth < 0):
        raise ValueError("ground truth must be nonnegative")
    loads = truth.shape[-1]
    pred2 = predictions.reshape(-1, loads)
    truth2 = truth.reshape(-1, loads)

    err_per_load = np.abs(pred2 - truth2).sum(axis=0)
    truth_per_load = truth2.sum(axis=0)
    err_total = float(err_per_load.sum())
    truth_total = float(truth_per_load.sum())
    if truth_total <= 0.0:
        raise ValueError("ground truth sums to zero; Estimated Accuracy undefined")

    if load_names is None:
        load_names = [f"load{i}" for i in range(loads)]
    elif len(load_names) != loads:
        raise ValueError(f"{len(load_names)} load names for {loads} loads")
    per = {}
    for i, name in enumerate(load_names):
        if truth_per_load[i] > 0.0:
            per[name] = 1.0 - err_per_load[i] / (2.0 * truth_per_load[i])
        else:
            per[name] = math.nan
    total = 1.0 - err_total / (2.0 * truth_total)
    return AccuracyReport(total, per, err_total, truth_total)


def mean_report(reports) -> AccuracyReport:
    """Arithmetic mean of fold reports (error and truth sums are totalled)."""
    reports = [r for r in reports if r is not None]
    if not reports:
        raise ValueError("no reports to average")
    total = sum(r.estimated_accuracy_total for r in reports) / len(reports)
    names = list(reports[0].per_appliance)
    per = {
        name: sum(r.per_appliance[name] for r in reports) / len(reports)
        for name in names
    }
    return AccuracyReport(
        total, per,
        sum(r.absolute_error_sum for r in reports),
        sum(r.ground_truth_sum for r in reports),
    )
