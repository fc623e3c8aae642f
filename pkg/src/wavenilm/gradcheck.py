"""Finite-difference verification of analytic parameter gradients."""

from dataclasses import dataclass

import numpy as np


@dataclass
class GradientCheckReport:
    max_relative_error: float
    parameter_count_checked: int
    worst_parameter: str = ""


def _mse(pred, target):
    diff = pred - target
    return float(np.mean(diff * diff))


def gradient_check(net, x, target, n_samples=120, step=1e-5, seed=0):
    """Compare analytic gradients against central finite differences.

    Perturbs a random subset of at least `n_samples` parameters (all of
    them when the network is smaller), re-evaluating an MSE loss at
    +/- `step` per parameter. Requires float64 parameters and runs with
    dropout off so the loss is a deterministic function of the parameters.
    """
    if net.dtype != np.float64:
        raise ValueError("gradient check requires a float64 network")
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)

    pred, cache = net.forward(x, training=False, return_cache=True)
    loss = _mse(pred, target)
    if not np.isfinite(loss):
        raise ValueError("loss is not finite")
    grad_pred = 2.0 * (pred - target) / pred.size
    analytic = net.backward(cache, grad_pred)

    params = net.parameters()
    names = net.parameter_names()
    sizes = [p.size for p in params]
    total = sum(sizes)
    starts = np.cumsum([0] + sizes)

    rng = np.random.default_rng(seed)
    n = min(n_samples, total)
    flat_indices = rng.choice(total, size=n, replace=False)

    max_rel = 0.0
    worst = ""
    for flat in flat_indices:
        which = int(np.searchsorted(starts, flat, side="right") - 1)
        offset = int(flat - starts[which])
        param = params[which].reshape(-1)
        original = param[offset]

        param[offset] = original + step
        loss_plus = _mse(net.forward(x, training=False), target)
        param[offset] = original - step
        loss_minus = _mse(net.forward(x, training=False), target)
        param[offset] = original

        numeric = (loss_plus - loss_minus) / (2.0 * step)
        a = float(analytic[which].reshape(-1)[offset])
        rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-8)
        if rel > max_rel:
            max_rel = rel
            worst = f"{names[which]}[{offset}]"
    return GradientCheckReport(max_rel, n, worst)
