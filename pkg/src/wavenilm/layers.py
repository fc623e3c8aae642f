"""Layer primitives: dilated causal convolution, time-distributed dense,
activations, and inverted dropout.

Layers hold their parameters as plain numpy arrays and expose explicit
``forward`` / ``backward`` methods; there is no autodiff graph. Training
runs in float64 so gradients can be verified against finite differences;
float32 copies are supported for inference.
"""

import numpy as np

from . import kernels


def check_finite(values, where):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"non-finite values in {where}")


def he_uniform(rng, shape, fan_in, dtype=np.float64):
    """Fan-in scaled uniform init, suited to relu/gated stacks."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# -- activations --------------------------------------------------------


def sigmoid(x):
    return kernels.sigmoid(np.asarray(x, dtype=float))


def sigmoid_backward(x, grad_out):
    s = kernels.sigmoid(np.asarray(x, dtype=float))
    return grad_out * s * (1.0 - s)


def tanh(x):
    return np.tanh(x)


def tanh_backward(x, grad_out):
    t = np.tanh(x)
    return grad_out * (1.0 - t * t)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_out):
    return np.where(np.asarray(x) > 0, grad_out, 0.0)


ACTIVATIONS = {
    "sigmoid": (sigmoid, sigmoid_backward),
    "tanh": (tanh, tanh_backward),
    "relu": (relu, relu_backward),
}


def activation_forward(kind, x):
    """Apply one of the supported elementwise activations."""
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}")
    x = np.asarray(x, dtype=float)
    check_finite(x, f"{kind} input")
    return ACTIVATIONS[kind][0](x)


def activation_backward(kind, x, grad_out):
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}")
    return ACTIVATIONS[kind][1](np.asarray(x, dtype=float), grad_out)


# -- dropout -------------------------------------------------------------


def dropout(x, rate, rng=None, training=True):
    """Inverted dropout.

    In training mode each element is zeroed with probability `rate` and
    survivors are scaled by 1/(1-rate), so inference is the identity.
    Returns ``(output, scale_mask)``; the mask is None when dropout was a
    no-op and must be reused by the matching backward pass otherwise.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = 1.0 - rate
    mask = (rng.random(size=x.shape) < keep).astype(x.dtype) / keep
    return x * mask, mask


def dropout_backward(grad_out, scale_mask):
    if scale_mask is None:
        return grad_out
    return grad_out * scale_mask


# -- layers --------------------------------------------------------------


class Dense:
    """Affine map over the channel axis, applied independently per time step."""

    def __init__(self, in_channels, out_channels, rng, dtype=np.float64):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.weights = he_uniform(rng, (in_channels, out_channels), in_channels, dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)

    def forward(self, x, validate=True):
        if x.shape[-1] != self.in_channels:
            raise ValueError(
                f"dense expects {self.in_channels} input channels, got {x.shape[-1]}"
            )
        if validate:
            check_finite(x, "dense input")
        return x @ self.weights + self.bias

    def backward(self, x, grad_out):
        if grad_out.shape[-1] != self.out_channels:
            raise ValueError("upstream gradient channel mismatch")
        grad_x = grad_out @ self.weights.T
        x2 = x.reshape(-1, self.in_channels)
        g2 = grad_out.reshape(-1, self.out_channels)
        return grad_x, x2.T @ g2, g2.sum(axis=0)

    def params(self):
        return [self.weights, self.bias]


class DilatedCausalConv:
    """1-D causal convolution with dilated taps.

    Output index ``t`` reads input indices ``t - dilation * k`` for
    ``k = 0..filter_length-1``; indices before the start of the series
    are treated as zeros (left zero-padding), so output length equals
    input length and no future sample is ever read.
    """

    def __init__(self, in_channels, out_channels, filter_length, dilation,
                 rng, dtype=np.float64):
        if filter_length < 1:
            raise ValueError(f"filter_length must be >= 1, got {filter_length}")
        if dilation < 1:
            raise ValueError(f"dilation must be >= 1, got {dilation}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.filter_length = filter_length
        self.dilation = dilation
        self.weights = he_uniform(
            rng, (filter_length, in_channels, out_channels),
            filter_length * in_channels, dtype,
        )
        self.bias = np.zeros(out_channels, dtype=dtype)

    @property
    def receptive_field(self):
        return self.dilation * (self.filter_length - 1) + 1

    def forward(self, x, validate=True):
        x = np.ascontiguousarray(x)
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ValueError(
                f"conv expects [batch, time, {self.in_channels}] input, "
                f"got shape {x.shape}"
            )
        if validate:
            check_finite(x, "conv input")
        return kernels.conv_forward(x, self.weights, self.bias, self.dilation)

    def backward(self, x, grad_out):
        x = np.ascontiguousarray(x)
        if grad_out.shape != (x.shape[0], x.shape[1], self.out_channels):
            raise ValueError(
                f"upstream gradient shape {grad_out.shape} does not match "
                f"forward output {(x.shape[0], x.shape[1], self.out_channels)}"
            )
        grad_out = np.ascontiguousarray(grad_out)
        return kernels.conv_backward(x, self.weights, grad_out, self.dilation)

    def params(self):
        return [self.weights, self.bias]
