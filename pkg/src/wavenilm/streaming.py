"""Constant-memory, constant-time-per-sample causal inference.

Each gated block keeps a ring buffer of its own *input* history, sized
``dilation * (filter_length - 1)`` samples, which is exactly the left
zero-padding window of the batched forward pass. A step then costs one
short dilated dot-product per convolution, independent of how many
samples the stream has seen. The filter and gate convolutions of a block
read the same input, so they share one buffer.

Buffers start zeroed, which reproduces batch-mode left zero-padding:
feeding a stream sample by sample yields the same outputs as one batched
forward over the whole prefix (to float rounding). Dropout is inference
mode by construction.
"""

import numpy as np

from . import kernels
from .network import Network


class StreamState:
    """Mutable per-stream state; single-owner, advanced serially by
    :func:`step`. Multiple states may share one immutable network."""

    def __init__(self, net: Network):
        self.net = net
        self.dtype = net.dtype
        self.buffers = []
        self.positions = []
        for block in net.blocks:
            capacity = block.filter_conv.dilation * (block.filter_conv.filter_length - 1)
            self.buffers.append(
                np.zeros((capacity, block.in_channels), dtype=self.dtype))
            self.positions.append(0)
        self.samples_seen = 0

    @property
    def buffered_entries(self):
        """Total ring-buffer entries; fixed at construction."""
        return sum(buf.size for buf in self.buffers)


def init_stream(net: Network) -> StreamState:
    """Fresh stream state, equivalent to an all-zeros history."""
    return StreamState(net)


def step(state: StreamState, sample) -> np.ndarray:
    """Advance the stream by one sample ``[input_channels]`` and return
    the per-load predictions ``[output_loads]``.

    Raises on shape mismatch or non-finite input, leaving the state
    untouched.
    """
    net = state.net
    config = net.config
    sample = np.asarray(sample, dtype=state.dtype)
    if sample.shape != (config.input_channels,):
        raise ValueError(
            f"expected sample of {config.input_channels} channels, "
            f"got shape {sample.shape}"
        )
    if not np.all(np.isfinite(sample)):
        raise ValueError("non-finite sample")

    h = sample @ net.input_dense.weights + net.input_dense.bias
    skips = [h]
    for i, block in enumerate(net.blocks):
        buf = state.buffers[i]
        pos = state.positions[i]
        z = kernels.stream_gated_step(
            buf, pos, h,
            block.filter_conv.weights, block.filter_conv.bias,
            block.gate_conv.weights, block.gate_conv.bias,
            block.filter_conv.dilation,
        )
        if buf.shape[0]:
            buf[pos] = h
            state.positions[i] = (pos + 1) % buf.shape[0]
        h = z
        skips.append(h)
    concat = np.concatenate(skips)
    mask = np.tanh(concat @ net.mask_head.weights + net.mask_head.bias)
    state.samples_seen += 1
    return mask * sample[config.mask_channel]
