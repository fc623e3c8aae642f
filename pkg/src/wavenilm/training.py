"""Windowed minibatch training: MSE on the post-warm-up region, Adam
updates, contiguous train/test splitting, and k-fold cross-validation.

The loss skips the first ``receptive_field - 1`` outputs of every
window, the positions whose receptive field still overlaps the zero
padding; windows overlap by the same span so every series index past the
warm-up lands in some window's loss region.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import window
from .metrics import AccuracyReport, estimated_accuracy, mean_report
from .network import Network


def mse_loss(predictions, targets, region_start=0) -> float:
    """Mean squared error over time indices >= `region_start`, all loads."""
    predictions = np.asarray(predictions)
    targets = np.asarray(targets)
    if predictions.shape != targets.shape:
        raise ValueError(
            f"prediction shape {predictions.shape} != target shape {targets.shape}")
    if not 0 <= region_start < predictions.shape[-2]:
        raise ValueError(
            f"region_start {region_start} leaves no loss region for "
            f"{predictions.shape[-2]} time steps")
    diff = predictions[..., region_start:, :] - targets[..., region_start:, :]
    return float(np.mean(diff * diff))


def mse_loss_grad(predictions, targets, region_start=0):
    """d(mse_loss)/d(predictions); zero on the warm-up region."""
    grad = np.zeros_like(predictions)
    diff = predictions[..., region_start:, :] - targets[..., region_start:, :]
    grad[..., region_start:, :] = (2.0 / diff.size) * diff
    return grad


class Adam:
    """Adaptive-moment gradient descent, updating parameters in place."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 eps=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ValueError(f"{len(grads)} gradients for {len(self.params)} parameters")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.learning_rate * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


@dataclass
class TrainConfig:
    batch_size: int = 50
    max_epochs: int = 500
    learning_rate: float = 1e-3
    warmup: int | None = None  # loss region start; None = receptive_field - 1
    patience: int = 20
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_val_accuracy: float
    diverged: bool = False
    final_params: list = field(default_factory=list)  # last-epoch parameters

    def history_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,val_accuracy"]
        for row in self.history:
            lines.append(
                f"{row.epoch},{row.train_loss!r},{row.val_loss!r},{row.val_accuracy!r}")
        return "\n".join(lines) + "\n"


def _forward_in_chunks(net, x, chunk=64):
    outs = [net.forward(x[i : i + chunk]) for i in range(0, len(x), chunk)]
    return np.concatenate(outs, axis=0)


def evaluate_windows(net, inputs, targets, warmup, load_names=None,
                     target_scale=1.0) -> AccuracyReport:
    """Estimated Accuracy of `net` over windowed data, scored on the
    post-warm-up region with predictions clamped to >= 0 and both sides
    mapped back to physical units."""
    pred = _forward_in_chunks(net, inputs)
    pred = np.maximum(pred[:, warmup:, :], 0.0) * target_scale
    truth = targets[:, warmup:, :] * target_scale
    return estimated_accuracy(pred, truth, load_names)


def train(net: Network, train_data, val_data, config: TrainConfig,
          load_names=None, target_scale=1.0) -> TrainResult:
    """Optimize `net` on windowed `(inputs, targets)` pairs.

    Tracks per-epoch train/validation loss and validation Estimated
    Accuracy, early-stops after `config.patience` epochs without a new
    best, and leaves `net` holding the best-validation parameters. A
    non-finite training loss aborts the run and restores the last best
    parameters. Fully reproducible from `config.seed`.
    """
    train_x, train_y = train_data
    val_x, val_y = val_data
    if len(train_x) != len(train_y) or len(train_x) == 0:
        raise ValueError("empty or mismatched training data")
    warmup = config.warmup
    if warmup is None:
        warmup = net.receptive_field - 1
    if warmup >= train_x.shape[1]:
        raise ValueError(
            f"warm-up of {warmup} leaves no loss region in windows of "
            f"{train_x.shape[1]} steps")

    rng = np.random.default_rng(config.seed)
    params = net.parameters()
    optimizer = Adam(params, config.learning_rate, config.beta1, config.beta2)

    best_params = [p.copy() for p in params]
    best_acc = -np.inf
    best_epoch = -1
    stale = 0
    history = []
    diverged = False

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_x))
        sq_sum = 0.0
        n_terms = 0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            x = np.ascontiguousarray(train_x[idx])
            y = train_y[idx]
            pred, cache = net.forward(x, training=True, rng=rng, return_cache=True)
            loss = mse_loss(pred, y, warmup)
            if not np.isfinite(loss):
                diverged = True
                break
            count = pred[:, warmup:, :].size
            sq_sum += loss * count
            n_terms += count
            grads = net.backward(cache, mse_loss_grad(pred, y, warmup))
            optimizer.step(grads)
        if diverged:
            warnings.warn(
                f"training diverged at epoch {epoch}; restoring best parameters")
            break

        train_loss = sq_sum / n_terms
        val_pred = _forward_in_chunks(net, val_x)
        val_loss = mse_loss(val_pred, val_y, warmup)
        val_acc = estimated_accuracy(
            np.maximum(val_pred[:, warmup:, :], 0.0) * target_scale,
            val_y[:, warmup:, :] * target_scale,
            load_names,
        ).estimated_accuracy_total
        history.append(EpochStats(epoch, train_loss, val_loss, val_acc))

        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            for dst, src in zip(best_params, params):
                dst[...] = src
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    final_params = [p.copy() for p in params]
    for dst, src in zip(params, best_params):
        dst[...] = src
    return TrainResult(history, best_epoch, best_acc, diverged, final_params)


def split_series(arrays, train_fraction=0.9):
    """Contiguous head/tail split of [time, ...] arrays (no shuffling
    across time). Returns (train_parts, test_parts)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    steps = arrays[0].shape[0]
    for a in arrays:
        if a.shape[0] != steps:
            raise ValueError("arrays disagree on series length")
    cut = int(steps * train_fraction)
    if cut < 1 or cut >= steps:
        raise ValueError(f"series of {steps} samples is too short to split")
    return tuple(a[:cut] for a in arrays), tuple(a[cut:] for a in arrays)


@dataclass
class FoldResult:
    fold: int
    report: AccuracyReport | None
    error: str = ""


def fold_spans(steps, k):
    """Contiguous test spans [start, end) that tile [0, steps) exactly."""
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if steps < k:
        raise ValueError(f"{steps} samples cannot tile {k} folds")
    bounds = [round(i * steps / k) for i in range(k + 1)]
    return [(bounds[i], bounds[i + 1]) for i in range(k)]


def _window_segments(segments, length, overlap):
    xs, ys = [], []
    for seg_x, seg_y in segments:
        if seg_x.shape[0] < length:
            continue
        wx, _ = window(seg_x, length, overlap)
        wy, _ = window(seg_y, length, overlap)
        xs.append(wx)
        ys.append(wy)
    if not xs:
        raise ValueError("no segment long enough for a single window")
    return np.concatenate(xs), np.concatenate(ys)


def cross_validate(build_net, inputs, targets, config: TrainConfig, k=10, *,
                   window_length=1440, warmup=None, load_names=None,
                   target_scale=1.0, val_fraction=0.1):
    """k-fold cross-validation over the timeline.

    `build_net` takes the fold index and returns a fresh network (use it
    to derive per-fold seeds). Each fold holds out one contiguous test
    span, trains on windows cut from the remaining segments, and scores
    Estimated Accuracy on the held-out span. A failing fold is recorded
    and the remaining folds still run. Returns ``(fold_results,
    mean_report_over_successful_folds)``.
    """
    steps = inputs.shape[0]
    spans = fold_spans(steps, k)
    results = []
    for fold, (lo, hi) in enumerate(spans):
        try:
            net = build_net(fold)
            fold_warmup = warmup if warmup is not None else net.receptive_field - 1
            overlap = fold_warmup
            train_x, train_y = _window_segments(
                [(inputs[:lo], targets[:lo]), (inputs[hi:], targets[hi:])],
                window_length, overlap)
            test_x, test_y = _window_segments(
                [(inputs[lo:hi], targets[lo:hi])], window_length, overlap)
            n_val = max(1, int(len(train_x) * val_fraction))
            if n_val >= len(train_x):
                raise ValueError("not enough training windows to carve validation")
            fold_config = TrainConfig(
                batch_size=config.batch_size, max_epochs=config.max_epochs,
                learning_rate=config.learning_rate, warmup=fold_warmup,
                patience=config.patience, seed=config.seed + fold,
                beta1=config.beta1, beta2=config.beta2)
            train(net,
                  (train_x[:-n_val], train_y[:-n_val]),
                  (train_x[-n_val:], train_y[-n_val:]),
                  fold_config, load_names, target_scale)
            report = evaluate_windows(
                net, test_x, test_y, fold_warmup, load_names, target_scale)
            results.append(FoldResult(fold, report))
        except (ValueError, FloatingPointError) as exc:
            warnings.warn(f"fold {fold} failed: {exc}")
            results.append(FoldResult(fold, None, str(exc)))
    successful = [r.report for r in results if r.report is not None]
    mean = mean_report(successful) if successful else None
    return results, mean
