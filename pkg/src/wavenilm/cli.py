"""Command-line operator surface.

Subcommands:

* ``synth``   generate a synthetic household CSV from a household config
* ``train``   train a network from an experiment config, writing a run
              directory with the config echo, per-epoch history, and
              best/final checkpoints
* ``eval``    score a checkpoint on a data split; ``--matrix`` instead
              trains and scores one cell per input-signal combination
* ``stream``  stdin/stdout filter: one sample per line in, per-load
              estimates out
* ``inspect`` print parameter count, receptive field, and the config
              echo of a checkpoint

Exit codes: 0 success, 1 user error (bad config, missing file), 2
internal error. Set ``WAVENILM_LOG=debug|info|warning`` for verbosity.
"""

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .checkpoint import load_checkpoint, save_checkpoint
from .data import (ScaleRecord, Scenario, build_scenario, ingest_csv,
                   normalize, window, write_csv)
from .network import (DEFAULT_BLOCK_WIDTHS, DEFAULT_DILATIONS, NetworkConfig,
                      build_network, receptive_field)
from .streaming import init_stream, step
from .synth import load_household_config, parse_household
from .training import TrainConfig, evaluate_windows, split_series, train

log = logging.getLogger("wavenilm")

MATRIX_CELLS = [
    (("I",), "I"),
    (("P",), "P"),
    (("Q",), "Q"),
    (("S",), "S"),
    (("P", "Q"), "P"),
    (("I", "P", "Q", "S"), "P"),
    (("I", "P", "Q", "S"), "I"),
]


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UserError(message)


def _load_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise UserError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UserError(f"{path}: {exc}") from None


def _table(cfg, name):
    if name not in cfg:
        raise UserError(f"config is missing the [{name}] section")
    if not isinstance(cfg[name], dict):
        raise UserError(f"config [{name}] must be a table")
    return cfg[name]


def _scenario_from_config(tbl) -> Scenario:
    try:
        return Scenario(
            mode=tbl.get("mode", "noisy"),
            target_loads=tuple(tbl["targets"]),
            input_signals=tuple(tbl.get("inputs", ("P",))),
            output_signal=tbl.get("output", "P"),
        )
    except KeyError as exc:
        raise UserError(f"config [scenario] is missing field {exc}") from None
    except ValueError as exc:
        raise UserError(f"config [scenario]: {exc}") from None


def _network_config(tbl, scenario) -> NetworkConfig:
    try:
        return NetworkConfig(
            input_channels=len(scenario.input_signals),
            output_loads=len(scenario.target_loads),
            block_widths=tuple(tbl.get("block_widths", DEFAULT_BLOCK_WIDTHS)),
            dilations=tuple(tbl.get("dilations", DEFAULT_DILATIONS)),
            filter_length=int(tbl.get("filter_length", 2)),
            dropout_rate=float(tbl.get("dropout", 0.10)),
            input_dense_width=int(tbl.get("input_dense_width", 512)),
            mask_channel=scenario.mask_channel,
        )
    except ValueError as exc:
        raise UserError(f"config [network]: {exc}") from None


def _train_config(tbl, seed_override=None) -> TrainConfig:
    seed = int(tbl.get("seed", 0)) if seed_override is None else seed_override
    try:
        return TrainConfig(
            batch_size=int(tbl.get("batch_size", 50)),
            max_epochs=int(tbl.get("epochs", 500)),
            learning_rate=float(tbl.get("learning_rate", 1e-3)),
            patience=int(tbl.get("patience", 20)),
            seed=seed,
        )
    except ValueError as exc:
        raise UserError(f"config [training]: {exc}") from None


def _load_series(data_tbl, base_dir, seed_override=None):
    source = data_tbl.get("source", "csv")
    if source == "csv":
        if "path" not in data_tbl:
            raise UserError("config [data]: source = \"csv\" needs a path field")
        return ingest_csv(base_dir / data_tbl["path"])
    if source == "synthetic":
        household = data_tbl.get("household")
        if isinstance(household, str):
            spec = load_household_config(base_dir / household)
        elif isinstance(household, dict):
            try:
                spec = parse_household(household)
            except ValueError as exc:
                raise UserError(f"config [data.household]: {exc}") from None
        else:
            raise UserError(
                "config [data]: source = \"synthetic\" needs a household "
                "path or inline [data.household] table")
        return spec.synthesize(seed=seed_override)
    raise UserError(f"config [data]: unknown source {source!r}")


def _windowed_splits(cfg, scenario, series, net_config, scales=None):
    """Common data pipeline: tensors, normalization, contiguous split,
    windowing. Returns a dict bundle."""
    training_tbl = cfg.get("training", {})
    window_length = int(training_tbl.get("window_length", 1440))
    train_fraction = float(training_tbl.get("train_fraction", 0.9))
    val_fraction = float(training_tbl.get("val_fraction", 0.1))
    warmup = receptive_field(net_config) - 1
    if warmup >= window_length:
        raise UserError(
            f"config: window_length {window_length} does not cover the "
            f"receptive field {warmup + 1}")

    tensors = build_scenario(series, scenario)
    norm, scales = normalize(tensors, scales)
    (train_x, train_y), (test_x, test_y) = split_series(
        (norm.inputs, norm.targets), train_fraction)
    bundle = {
        "scales": scales,
        "warmup": warmup,
        "window_length": window_length,
        "val_fraction": val_fraction,
        "train_fraction": train_fraction,
    }
    for name, (xs, ys) in (("train", (train_x, train_y)),
                           ("test", (test_x, test_y)),
                           ("all", (norm.inputs, norm.targets))):
        if xs.shape[0] >= window_length:
            wx, _ = window(xs, window_length, warmup)
            wy, _ = window(ys, window_length, warmup)
            bundle[name] = (wx, wy)
        else:
            bundle[name] = None
    return bundle


def _checkpoint_extra(scenario, scales, bundle):
    return {
        "scenario": {
            "mode": scenario.mode,
            "targets": list(scenario.target_loads),
            "inputs": list(scenario.input_signals),
            "output": scenario.output_signal,
        },
        "scales": scales.to_dict(),
        "window_length": bundle["window_length"],
        "warmup": bundle["warmup"],
        "train_fraction": bundle["train_fraction"],
    }


def _train_one(cfg, scenario, series, seed_override=None):
    """Train a network per config; returns (net, result, bundle, extra)."""
    net_config = _network_config(cfg.get("network", {}), scenario)
    train_config = _train_config(cfg.get("training", {}), seed_override)
    bundle = _windowed_splits(cfg, scenario, series, net_config)
    if bundle["train"] is None:
        raise UserError("training split is shorter than one window")
    train_x, train_y = bundle["train"]
    n_val = max(1, int(len(train_x) * bundle["val_fraction"]))
    if n_val >= len(train_x):
        raise UserError(
            f"{len(train_x)} training windows cannot spare {n_val} for validation")

    net = build_network(net_config, seed=train_config.seed)
    log.info("training: %d windows, %d parameters, seed %d",
             len(train_x), net.parameter_count(), train_config.seed)
    result = train(
        net,
        (train_x[:-n_val], train_y[:-n_val]),
        (train_x[-n_val:], train_y[-n_val:]),
        train_config,
        load_names=list(scenario.target_loads),
        target_scale=bundle["scales"].target_scale,
    )
    extra = _checkpoint_extra(scenario, bundle["scales"], bundle)
    return net, result, bundle, extra


# -- subcommands ----------------------------------------------------------


def cmd_train(args):
    cfg = _load_toml(args.config)
    base_dir = Path(args.config).resolve().parent
    scenario = _scenario_from_config(_table(cfg, "scenario"))
    series = _load_series(_table(cfg, "data"), base_dir)
    net, result, bundle, extra = _train_one(cfg, scenario, series, args.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_bytes(Path(args.config).read_bytes())
    (out / "history.csv").write_text(result.history_csv())
    save_checkpoint(out / "best.ckpt", net, extra)
    saved_best = [p.copy() for p in net.parameters()]
    for dst, src in zip(net.parameters(), result.final_params):
        dst[...] = src
    save_checkpoint(out / "final.ckpt", net, extra)
    for dst, src in zip(net.parameters(), saved_best):
        dst[...] = src
    log.info("run directory %s: best epoch %d, val accuracy %.4f",
             out, result.best_epoch, result.best_val_accuracy)
    print(out)
    return 0


def _eval_matrix(args, cfg, base_dir):
    base_tbl = _table(cfg, "scenario")
    base_seed = args.seed if args.seed is not None else int(
        cfg.get("training", {}).get("seed", 0))
    rows = []
    for cell, (inputs, output) in enumerate(MATRIX_CELLS):
        scenario = Scenario(
            mode=base_tbl.get("mode", "noisy"),
            target_loads=tuple(base_tbl["targets"]),
            input_signals=inputs,
            output_signal=output,
        )
        series = _load_series(_table(cfg, "data"), base_dir)
        net, result, bundle, extra = _train_one(
            cfg, scenario, series, base_seed + cell)
        if bundle["test"] is None:
            raise UserError("test split is shorter than one window")
        report = evaluate_windows(
            net, *bundle["test"], bundle["warmup"],
            list(scenario.target_loads), bundle["scales"].target_scale)
        label = "+".join(inputs)
        log.info("matrix cell %s -> %s: %.4f",
                 label, output, report.estimated_accuracy_total)
        rows.append((label, output, len(scenario.target_loads),
                     report.estimated_accuracy_total))
    lines = ["inputs,output,loads,estimated_accuracy"]
    lines += [f"{i},{o},{n},{acc!r}" for i, o, n, acc in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "matrix.csv").write_text(text)
    print(text, end="")
    return 0


def cmd_eval(args):
    cfg = _load_toml(args.config)
    base_dir = Path(args.config).resolve().parent
    if args.matrix:
        return _eval_matrix(args, cfg, base_dir)
    if not args.checkpoint:
        raise UserError("eval needs --checkpoint (or --matrix)")
    if not os.path.exists(args.checkpoint):
        raise UserError(f"checkpoint not found: {args.checkpoint}")
    net, extra = load_checkpoint(args.checkpoint)
    try:
        scenario = Scenario(
            mode=extra["scenario"]["mode"],
            target_loads=tuple(extra["scenario"]["targets"]),
            input_signals=tuple(extra["scenario"]["inputs"]),
            output_signal=extra["scenario"]["output"],
        )
        scales = ScaleRecord.from_dict(extra["scales"])
    except KeyError as exc:
        raise UserError(f"checkpoint lacks metadata field {exc}") from None
    series = _load_series(_table(cfg, "data"), base_dir)
    bundle = _windowed_splits(cfg, scenario, series, net.config, scales)
    data = bundle[args.split]
    if data is None:
        raise UserError(f"{args.split} split is shorter than one window")
    report = evaluate_windows(
        net, *data, bundle["warmup"],
        list(scenario.target_loads), scales.target_scale)
    text = report.to_text()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        (out / "report.csv").write_text(
            report.csv_header() + "\n" + report.to_csv_row() + "\n")
    print(text, end="")
    return 0


def cmd_stream(args):
    if not os.path.exists(args.checkpoint):
        raise UserError(f"checkpoint not found: {args.checkpoint}")
    net, extra = load_checkpoint(args.checkpoint)
    try:
        scales = ScaleRecord.from_dict(extra["scales"])
        load_names = extra["scenario"]["targets"]
    except KeyError as exc:
        raise UserError(f"checkpoint lacks metadata field {exc}") from None
    state = init_stream(net)
    out = sys.stdout
    out.write(",".join(load_names) + "\n")
    out.flush()
    for lineno, line in enumerate(sys.stdin, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            sample = np.array([float(v) for v in line.split(",")])
            estimate = step(state, sample / scales.input_scales)
        except ValueError as exc:
            print(f"stream: line {lineno} rejected: {exc}", file=sys.stderr)
            continue
        estimate = np.maximum(estimate, 0.0) * scales.target_scale
        out.write(",".join(repr(float(v)) for v in estimate) + "\n")
        out.flush()
    return 0


def cmd_synth(args):
    spec = load_household_config(args.config)
    series = spec.synthesize(seed=args.seed)
    write_csv(series, args.out)
    log.info("wrote %d samples to %s", len(series), args.out)
    return 0


def cmd_inspect(args):
    if not os.path.exists(args.checkpoint):
        raise UserError(f"checkpoint not found: {args.checkpoint}")
    net, extra = load_checkpoint(args.checkpoint)
    print(f"parameter_count = {net.parameter_count()}")
    print(f"receptive_field = {net.receptive_field}")
    cfg = net.config
    print(f"input_channels = {cfg.input_channels}")
    print(f"output_loads = {cfg.output_loads}")
    print(f"block_widths = {list(cfg.block_widths)}")
    print(f"dilations = {list(cfg.dilations)}")
    print(f"filter_length = {cfg.filter_length}")
    print(f"dropout_rate = {cfg.dropout_rate}")
    print(f"input_dense_width = {cfg.input_dense_width}")
    print(f"mask_channel = {cfg.mask_channel}")
    if extra:
        print("extra = " + json.dumps(extra, sort_keys=True))
    return 0


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavenilm", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic household CSV")
    p.add_argument("--config", required=True, help="household TOML")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a network from an experiment config")
    p.add_argument("--config", required=True, help="experiment TOML")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint, or run the input matrix")
    p.add_argument("--config", required=True, help="experiment TOML (data section)")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None, help="directory for report files")
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--matrix", action="store_true",
                   help="train and score one cell per input-signal combination")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stream", help="stdin/stdout streaming disaggregation")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("inspect", help="summarize a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("WAVENILM_LOG", "warning").upper()
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except (UserError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
