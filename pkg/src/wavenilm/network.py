"""Network topology: input projection, a stack of gated dilated causal
blocks with skip connections, and a tanh mask head.

Each block runs two parallel dilated causal convolutions over the same
input, a relu "regressor" path and a sigmoid "gate" path, multiplied
elementwise and followed by dropout. Every block output is both fed to
the next block and concatenated (together with the input projection)
into the mask head, a time-distributed dense layer with tanh activation.
The per-load prediction is the mask multiplied by the single input
channel carrying the quantity being disaggregated.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .layers import Dense, DilatedCausalConv, check_finite, dropout, dropout_backward

DEFAULT_BLOCK_WIDTHS = (512, 256, 256, 128, 128, 256, 256, 256, 512)
DEFAULT_DILATIONS = (1, 2, 4, 8, 16, 32, 64, 128, 256)


@dataclass(frozen=True)
class NetworkConfig:
    input_channels: int
    output_loads: int
    block_widths: tuple = DEFAULT_BLOCK_WIDTHS
    dilations: tuple = DEFAULT_DILATIONS
    filter_length: int = 2
    dropout_rate: float = 0.10
    input_dense_width: int = 512
    mask_channel: int = 0

    def __post_init__(self):
        object.__setattr__(self, "block_widths", tuple(self.block_widths))
        object.__setattr__(self, "dilations", tuple(self.dilations))
        if self.input_channels < 1:
            raise ValueError("input_channels must be >= 1")
        if self.output_loads < 1:
            raise ValueError("output_loads must be >= 1")
        if len(self.block_widths) != len(self.dilations):
            raise ValueError(
                f"block_widths has {len(self.block_widths)} entries but "
                f"dilations has {len(self.dilations)}"
            )
        if not 0 <= self.mask_channel < self.input_channels:
            raise ValueError(
                f"mask_channel {self.mask_channel} out of range for "
                f"{self.input_channels} input channels"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def receptive_field(self):
        return receptive_field(self)

    @property
    def skip_width(self):
        return self.input_dense_width + sum(self.block_widths)


def receptive_field(config) -> int:
    """Composed receptive field: 1 + sum over blocks of dilation*(taps-1)."""
    return 1 + sum(d * (config.filter_length - 1) for d in config.dilations)


def parameter_count_for_config(config) -> int:
    """Accounting oracle: sum of weight and bias extents per layer."""
    width = config.input_dense_width
    total = config.input_channels * width + width
    in_ch = width
    for out_ch in config.block_widths:
        per_conv = config.filter_length * in_ch * out_ch + out_ch
        total += 2 * per_conv
        in_ch = out_ch
    total += config.skip_width * config.output_loads + config.output_loads
    return total


class GatedBlock:
    """relu(filter_conv(x)) * sigmoid(gate_conv(x)), then dropout."""

    def __init__(self, in_channels, out_channels, filter_length, dilation,
                 dropout_rate, rng, dtype=np.float64):
        self.filter_conv = DilatedCausalConv(
            in_channels, out_channels, filter_length, dilation, rng, dtype)
        self.gate_conv = DilatedCausalConv(
            in_channels, out_channels, filter_length, dilation, rng, dtype)
        self.dropout_rate = dropout_rate

    @property
    def in_channels(self):
        return self.filter_conv.in_channels

    @property
    def out_channels(self):
        return self.filter_conv.out_channels

    def forward(self, x, training=False, rng=None):
        f = self.filter_conv.forward(x, validate=False)
        g = self.gate_conv.forward(x, validate=False)
        z = kernels.gated_forward(f, g)
        out, drop_mask = dropout(z, self.dropout_rate, rng, training)
        return out, (x, f, g, drop_mask)

    def backward(self, cache, grad_out):
        x, f, g, drop_mask = cache
        grad_out = dropout_backward(grad_out, drop_mask)
        grad_f, grad_g = kernels.gated_backward(f, g, grad_out)
        gx_f, gw_f, gb_f = self.filter_conv.backward(x, grad_f)
        gx_g, gw_g, gb_g = self.gate_conv.backward(x, grad_g)
        return gx_f + gx_g, [gw_f, gb_f, gw_g, gb_g]

    def params(self):
        return self.filter_conv.params() + self.gate_conv.params()


class Network:
    """Instantiated model; see :func:`build_network`."""

    def __init__(self, config, input_dense, blocks, mask_head):
        self.config = config
        self.input_dense = input_dense
        self.blocks = blocks
        self.mask_head = mask_head

    @property
    def dtype(self):
        return self.input_dense.weights.dtype

    @property
    def receptive_field(self):
        return receptive_field(self.config)

    def parameters(self):
        out = self.input_dense.params()
        for block in self.blocks:
            out.extend(block.params())
        out.extend(self.mask_head.params())
        return out

    def parameter_names(self):
        names = ["input_dense.weights", "input_dense.bias"]
        for i in range(len(self.blocks)):
            for conv in ("filter", "gate"):
                names.append(f"block{i}.{conv}.weights")
                names.append(f"block{i}.{conv}.bias")
        names.extend(["mask_head.weights", "mask_head.bias"])
        return names

    def parameter_count(self):
        return sum(p.size for p in self.parameters())

    def forward(self, x, training=False, rng=None, return_cache=False):
        """Run the network over ``[batch, time, input_channels]``.

        Returns predictions ``[batch, time, output_loads]``; the output at
        time t depends only on inputs at times <= t. With dropout off the
        result is deterministic.
        """
        x = np.ascontiguousarray(np.asarray(x, dtype=self.dtype))
        if x.ndim != 3 or x.shape[2] != self.config.input_channels:
            raise ValueError(
                f"expected [batch, time, {self.config.input_channels}] input, "
                f"got shape {x.shape}"
            )
        check_finite(x, "network input")
        h = self.input_dense.forward(x, validate=False)
        skips = [h]
        block_caches = []
        for block in self.blocks:
            h, cache = block.forward(h, training=training, rng=rng)
            skips.append(h)
            block_caches.append(cache)
        concat = np.concatenate(skips, axis=-1)
        mask = np.tanh(self.mask_head.forward(concat, validate=False))
        masked_input = x[..., self.config.mask_channel : self.config.mask_channel + 1]
        pred = mask * masked_input
        if not return_cache:
            return pred
        cache = {
            "x": x,
            "block_caches": block_caches,
            "concat": concat,
            "mask": mask,
            "masked_input": masked_input,
        }
        return pred, cache

    def backward(self, cache, grad_pred):
        """Gradients of a scalar loss wrt every parameter, given d(loss)/d(pred).

        Returns arrays aligned with :meth:`parameters`.
        """
        mask = cache["mask"]
        concat = cache["concat"]
        grad_head_in = grad_pred * cache["masked_input"] * (1.0 - mask * mask)
        grad_concat, gw_head, gb_head = self.mask_head.backward(concat, grad_head_in)

        widths = [self.config.input_dense_width] + list(self.config.block_widths)
        offsets = np.cumsum([0] + widths)
        segments = [
            grad_concat[..., offsets[i] : offsets[i + 1]] for i in range(len(widths))
        ]

        block_grads = []
        grad_next = None
        for i in range(len(self.blocks) - 1, -1, -1):
            grad_out = segments[i + 1]
            if grad_next is not None:
                grad_out = grad_out + grad_next
            grad_next, grads_i = self.blocks[i].backward(
                cache["block_caches"][i], np.ascontiguousarray(grad_out))
            block_grads.append(grads_i)
        grad_h0 = segments[0] + grad_next if grad_next is not None else segments[0]
        _, gw_dense, gb_dense = self.input_dense.backward(cache["x"], grad_h0)

        grads = [gw_dense, gb_dense]
        for grads_i in reversed(block_grads):
            grads.extend(grads_i)
        grads.extend([gw_head, gb_head])
        return grads

    def cast(self, dtype):
        """Copy of the network with parameters cast to `dtype` (e.g. float32
        for inference)."""
        clone = build_network(self.config, seed=0, dtype=dtype)
        for dst, src in zip(clone.parameters(), self.parameters()):
            dst[...] = src.astype(dtype)
        return clone


def build_network(config: NetworkConfig, seed: int, dtype=np.float64) -> Network:
    """Deterministically initialize a network from `seed`."""
    rng = np.random.default_rng(seed)
    input_dense = Dense(config.input_channels, config.input_dense_width, rng, dtype)
    blocks = []
    in_ch = config.input_dense_width
    for width, dilation in zip(config.block_widths, config.dilations):
        blocks.append(GatedBlock(
            in_ch, width, config.filter_length, dilation,
            config.dropout_rate, rng, dtype))
        in_ch = width
    mask_head = Dense(config.skip_width, config.output_loads, rng, dtype)
    return Network(config, input_dense, blocks, mask_head)
