"""Versioned binary checkpoint container.

Layout: magic ``WNCK``, version u32, header length u64 (all little
endian), a JSON header, then raw little-endian float32 array data in
manifest order. The header carries the network config, a caller-supplied
``extra`` dict (normalization scales, scenario echo, ...), and a manifest
of (name, shape) pairs in parameter declaration order. Serialization is
canonical, so identical parameters produce byte-identical files.
"""

import json
import struct

import numpy as np

from .network import Network, NetworkConfig, build_network

MAGIC = b"WNCK"
VERSION = 1


def _config_to_dict(config: NetworkConfig) -> dict:
    return {
        "input_channels": config.input_channels,
        "output_loads": config.output_loads,
        "block_widths": list(config.block_widths),
        "dilations": list(config.dilations),
        "filter_length": config.filter_length,
        "dropout_rate": config.dropout_rate,
        "input_dense_width": config.input_dense_width,
        "mask_channel": config.mask_channel,
    }


def _config_from_dict(d: dict) -> NetworkConfig:
    return NetworkConfig(
        input_channels=d["input_channels"],
        output_loads=d["output_loads"],
        block_widths=tuple(d["block_widths"]),
        dilations=tuple(d["dilations"]),
        filter_length=d["filter_length"],
        dropout_rate=d["dropout_rate"],
        input_dense_width=d["input_dense_width"],
        mask_channel=d["mask_channel"],
    )


def save_checkpoint(path, net: Network, extra: dict | None = None):
    """Write `net` (parameters as little-endian float32) plus `extra`
    metadata to `path`."""
    params = net.parameters()
    names = net.parameter_names()
    manifest = [{"name": n, "shape": list(p.shape)} for n, p in zip(names, params)]
    header = {
        "config": _config_to_dict(net.config),
        "extra": extra or {},
        "manifest": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for p in params:
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_checkpoint(path, dtype=np.float64):
    """Read a checkpoint; returns ``(network, extra)``.

    Parameters are stored in float32; `dtype` selects the working
    precision of the returned network.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode())
        config = _config_from_dict(header["config"])
        net = build_network(config, seed=0, dtype=dtype)
        params = net.parameters()
        names = net.parameter_names()
        if [m["name"] for m in header["manifest"]] != names:
            raise ValueError(f"{path}: manifest does not match network layout")
        for entry, param in zip(header["manifest"], params):
            shape = tuple(entry["shape"])
            if shape != param.shape:
                raise ValueError(
                    f"{path}: array {entry['name']} has shape {shape}, "
                    f"expected {param.shape}"
                )
            raw = fh.read(param.size * 4)
            if len(raw) != param.size * 4:
                raise ValueError(f"{path}: truncated array data for {entry['name']}")
            param[...] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(dtype)
        trailing = fh.read(1)
        if trailing:
            raise ValueError(f"{path}: trailing bytes after array data")
    return net, header["extra"]
