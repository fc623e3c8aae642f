"""Hot numeric kernels with numba-compiled and pure-numpy variants.

Everything that runs inside the training or streaming inner loop lives
here: the dilated causal convolution (forward and backward), the fused
relu*sigmoid gate, and the single-sample streaming step. Each kernel has
two interchangeable implementations:

* a vectorized numpy version (always available), and
* a numba ``@njit`` version compiled on first use.

The active set is chosen at import time from the ``WAVENILM_BACKEND``
environment variable:

* ``auto`` (default): numba when importable, numpy otherwise
* ``numpy``: force the pure-numpy path
* ``numba``: require the compiled path, raise if numba is missing

Both variants stay importable through :func:`implementations` so tests
can assert agreement and benchmarks can compare them.

Array conventions: batched series are ``[batch, time, channels]``,
C-contiguous; conv weights are ``[taps, in_channels, out_channels]``
with tap ``k`` reading the input ``dilation * k`` steps in the past.
"""

import os
import warnings

import numpy as np

BACKEND_ENV = "WAVENILM_BACKEND"

_requested = os.environ.get(BACKEND_ENV, "auto").strip().lower()
if _requested not in ("auto", "numpy", "numba"):
    raise ValueError(
        f"{BACKEND_ENV} must be one of auto/numpy/numba, got {_requested!r}"
    )

HAVE_NUMBA = False
if _requested != "numpy":
    try:
        from numba import njit
        from numba.core.errors import NumbaPerformanceWarning

        # np.dot on row-sliced views trips numba's contiguity heuristic even
        # though the slices are contiguous at runtime; the warning is noise.
        warnings.filterwarnings("ignore", category=NumbaPerformanceWarning)
        HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise ImportError(
                f"{BACKEND_ENV}=numba but numba is not importable"
            ) from None

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# -- pure numpy ---------------------------------------------------------


def _sigmoid_np(x):
    # split by sign to avoid exp overflow warnings on large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _conv_forward_np(x, weights, bias, dilation):
    batch, steps, _ = x.shape
    taps = weights.shape[0]
    y = np.empty((batch, steps, weights.shape[2]), dtype=x.dtype)
    y[:] = bias
    for k in range(taps):
        shift = dilation * k
        if shift >= steps:
            break
        y[:, shift:, :] += x[:, : steps - shift, :] @ weights[k]
    return y


def _conv_backward_np(x, weights, grad_out, dilation):
    steps = x.shape[1]
    taps = weights.shape[0]
    grad_x = np.zeros_like(x)
    grad_w = np.zeros_like(weights)
    grad_b = grad_out.sum(axis=(0, 1))
    for k in range(taps):
        shift = dilation * k
        if shift >= steps:
            break
        gs = grad_out[:, shift:, :]
        grad_x[:, : steps - shift, :] += gs @ weights[k].T
        grad_w[k] = np.tensordot(x[:, : steps - shift, :], gs, axes=([0, 1], [0, 1]))
    return grad_x, grad_w, grad_b


def _gated_forward_np(f, g):
    return np.maximum(f, 0.0) * _sigmoid_np(g)


def _gated_backward_np(f, g, grad_out):
    s = _sigmoid_np(g)
    grad_f = np.where(f > 0, grad_out * s, 0.0)
    grad_g = grad_out * np.maximum(f, 0.0) * s * (1.0 - s)
    return grad_f, grad_g


def _stream_gated_step_np(buf, pos, x, w_f, b_f, w_g, b_g, dilation):
    taps = w_f.shape[0]
    cap = buf.shape[0]
    y_f = b_f + x @ w_f[0]
    y_g = b_g + x @ w_g[0]
    for k in range(1, taps):
        tap = buf[(pos - dilation * k) % cap]
        y_f += tap @ w_f[k]
        y_g += tap @ w_g[k]
    return np.maximum(y_f, 0.0) * _sigmoid_np(y_g)


_NUMPY_IMPL = {
    "conv_forward": _conv_forward_np,
    "conv_backward": _conv_backward_np,
    "gated_forward": _gated_forward_np,
    "gated_backward": _gated_backward_np,
    "stream_gated_step": _stream_gated_step_np,
}


# -- numba --------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _conv_forward_nb(x, weights, bias, dilation):
        batch, steps, _ = x.shape
        taps, _, out_ch = weights.shape
        y = np.empty((batch, steps, out_ch), dtype=x.dtype)
        for b in range(batch):
            for t in range(steps):
                y[b, t, :] = bias
        for k in range(taps):
            shift = dilation * k
            if shift >= steps:
                break
            for b in range(batch):
                y[b, shift:, :] += np.dot(x[b, : steps - shift, :], weights[k])
        return y

    @njit(cache=True)
    def _conv_backward_nb(x, weights, grad_out, dilation):
        batch, steps, _ = x.shape
        taps, _, out_ch = weights.shape
        grad_x = np.zeros_like(x)
        grad_w = np.zeros_like(weights)
        grad_b = np.zeros(out_ch, dtype=x.dtype)
        for b in range(batch):
            for t in range(steps):
                for o in range(out_ch):
                    grad_b[o] += grad_out[b, t, o]
        for k in range(taps):
            shift = dilation * k
            if shift >= steps:
                break
            wk_t = weights[k].T.copy()
            for b in range(batch):
                gs = grad_out[b, shift:, :]
                grad_x[b, : steps - shift, :] += np.dot(gs, wk_t)
                grad_w[k] += np.dot(x[b, : steps - shift, :].T, gs)
        return grad_x, grad_w, grad_b

    @njit(cache=True)
    def _gated_forward_nb_flat(f, g, out):
        for i in range(f.shape[0]):
            r = f[i] if f[i] > 0.0 else 0.0
            gi = g[i]
            if gi >= 0.0:
                s = 1.0 / (1.0 + np.exp(-gi))
            else:
                e = np.exp(gi)
                s = e / (1.0 + e)
            out[i] = r * s

    @njit(cache=True)
    def _gated_backward_nb_flat(f, g, grad_out, grad_f, grad_g):
        for i in range(f.shape[0]):
            gi = g[i]
            if gi >= 0.0:
                s = 1.0 / (1.0 + np.exp(-gi))
            else:
                e = np.exp(gi)
                s = e / (1.0 + e)
            grad_f[i] = grad_out[i] * s if f[i] > 0.0 else 0.0
            r = f[i] if f[i] > 0.0 else 0.0
            grad_g[i] = grad_out[i] * r * s * (1.0 - s)

    def _gated_forward_nb(f, g):
        out = np.empty_like(f)
        _gated_forward_nb_flat(f.ravel(), g.ravel(), out.ravel())
        return out

    def _gated_backward_nb(f, g, grad_out):
        grad_f = np.empty_like(f)
        grad_g = np.empty_like(g)
        _gated_backward_nb_flat(
            f.ravel(), g.ravel(), grad_out.ravel(), grad_f.ravel(), grad_g.ravel()
        )
        return grad_f, grad_g

    @njit(cache=True)
    def _stream_gated_step_nb(buf, pos, x, w_f, b_f, w_g, b_g, dilation):
        taps, _, out_ch = w_f.shape
        cap = buf.shape[0]
        y_f = b_f + np.dot(x, w_f[0])
        y_g = b_g + np.dot(x, w_g[0])
        for k in range(1, taps):
            tap = buf[(pos - dilation * k) % cap]
            y_f += np.dot(tap, w_f[k])
            y_g += np.dot(tap, w_g[k])
        z = np.empty(out_ch, dtype=x.dtype)
        for o in range(out_ch):
            r = y_f[o] if y_f[o] > 0.0 else 0.0
            gi = y_g[o]
            if gi >= 0.0:
                s = 1.0 / (1.0 + np.exp(-gi))
            else:
                e = np.exp(gi)
                s = e / (1.0 + e)
            z[o] = r * s
        return z

    _NUMBA_IMPL = {
        "conv_forward": _conv_forward_nb,
        "conv_backward": _conv_backward_nb,
        "gated_forward": _gated_forward_nb,
        "gated_backward": _gated_backward_nb,
        "stream_gated_step": _stream_gated_step_nb,
    }
else:
    _NUMBA_IMPL = None


def implementations(name):
    """Return the kernel set for backend `name` ("numpy" or "numba").

    Raises if the numba set is requested but unavailable.
    """
    if name == "numpy":
        return _NUMPY_IMPL
    if name == "numba":
        if _NUMBA_IMPL is None:
            raise RuntimeError("numba backend unavailable")
        return _NUMBA_IMPL
    raise ValueError(f"unknown backend {name!r}")


_active = implementations(BACKEND)
conv_forward = _active["conv_forward"]
conv_backward = _active["conv_backward"]
gated_forward = _active["gated_forward"]
gated_backward = _active["gated_backward"]
stream_gated_step = _active["stream_gated_step"]

sigmoid = _sigmoid_np
