"""Meter-series ingestion, scenario construction, normalization, and
windowing.

CSV layout: a header row, column 1 the timestamp (epoch seconds or
ISO-8601), remaining columns named ``<entity>_<signal>`` where the
signal suffix is one of I (amps), P (watts), Q (var), S (VA), e.g.
``agg_P`` or ``heat_pump_I``. The ``agg`` entity is the aggregate meter;
``noise`` holds the residual component of synthetic data.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

SIGNALS = ("I", "P", "Q", "S")
AGGREGATE = "agg"
NOISE = "noise"

# Deferrable-load preset keyed to AMPds2 sub-meter codes; edit to taste.
DEFERRABLE_LOADS = {
    "hvac": "FRE",
    "heat_pump": "HPE",
    "wall_oven": "WOE",
    "clothes_dryer": "CDE",
    "dishwasher": "DWE",
}


@dataclass
class MeterSeries:
    """Uniformly sampled multi-channel measurements.

    `channels` maps entity -> signal -> float64 array, all on the shared
    `timestamps` grid.
    """

    timestamps: np.ndarray
    channels: dict
    step_seconds: int = 60

    def __len__(self):
        return len(self.timestamps)

    def appliances(self):
        return sorted(e for e in self.channels if e not in (AGGREGATE, NOISE))

    def signal(self, entity, kind):
        try:
            return self.channels[entity][kind]
        except KeyError:
            raise KeyError(f"series has no channel {entity}_{kind}") from None


def _parse_timestamp(text):
    try:
        return float(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _split_column(name):
    if "_" not in name:
        raise ValueError(
            f"column {name!r} is not of the form <entity>_<signal>")
    entity, signal = name.rsplit("_", 1)
    if signal not in SIGNALS:
        raise ValueError(
            f"column {name!r} has unknown signal suffix {signal!r}; "
            f"expected one of {SIGNALS}")
    return entity, signal


def ingest_csv(path, channel_map=None, step_seconds=60,
               max_gap_run=5, max_gap_fraction=0.05) -> MeterSeries:
    """Read a meter CSV into a gap-free uniform grid.

    `channel_map` optionally binds column names to (entity, signal)
    pairs, overriding the ``<entity>_<signal>`` naming convention.
    Timestamps must be strictly increasing on a multiple-of-step grid.
    Gaps of at most `max_gap_run` consecutive missing samples are filled
    by holding the previous value (with a warning); longer gaps, or more
    than `max_gap_fraction` of the grid missing overall, are rejected.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 2:
            raise ValueError(f"{path}: need a timestamp column plus data columns")
        bindings = []
        for name in header[1:]:
            name = name.strip()
            if channel_map is not None:
                if name not in channel_map:
                    raise ValueError(f"{path}: column {name!r} missing from channel_map")
                entity, signal = channel_map[name]
                if signal not in SIGNALS:
                    raise ValueError(
                        f"channel_map binds {name!r} to unknown signal {signal!r}")
            else:
                entity, signal = _split_column(name)
            bindings.append((entity, signal))

        times = []
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            times.append(_parse_timestamp(row[0]))
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")

    times = np.asarray(times)
    values = np.asarray(rows, dtype=np.float64)
    diffs = np.diff(times)
    if np.any(diffs <= 0):
        bad = int(np.argmax(diffs <= 0))
        raise ValueError(
            f"{path}: non-monotone timestamps around row {bad + 2}")
    offsets = (times - times[0]) / step_seconds
    grid = np.rint(offsets)
    if np.any(np.abs(offsets - grid) > 1e-6):
        raise ValueError(
            f"{path}: timestamps are not on a {step_seconds}s grid")
    grid = grid.astype(np.int64)

    total = int(grid[-1]) + 1
    missing = total - len(grid)
    if missing:
        runs = np.diff(grid) - 1
        worst = int(runs.max())
        if worst > max_gap_run:
            raise ValueError(
                f"{path}: gap of {worst} consecutive missing samples "
                f"exceeds the fill limit of {max_gap_run}")
        if missing / total > max_gap_fraction:
            raise ValueError(
                f"{path}: {missing}/{total} samples missing "
                f"({missing / total:.1%} > {max_gap_fraction:.0%})")
        filled = np.empty((total, values.shape[1]), dtype=np.float64)
        filled[grid] = values
        present = np.zeros(total, dtype=bool)
        present[grid] = True
        hold = np.maximum.accumulate(np.where(present, np.arange(total), -1))
        filled = filled[hold]
        values = filled
        warnings.warn(
            f"{path}: filled {missing} missing samples by previous-value hold")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: non-finite values")

    timestamps = times[0] + step_seconds * np.arange(total, dtype=np.int64)
    channels = {}
    for col, (entity, signal) in enumerate(bindings):
        channels.setdefault(entity, {})[signal] = values[:, col].copy()
    return MeterSeries(timestamps, channels, step_seconds)


def write_csv(series: MeterSeries, path):
    """Write a MeterSeries in the ingestible CSV layout (exact float
    round trip via repr)."""
    entities = []
    if AGGREGATE in series.channels:
        entities.append(AGGREGATE)
    entities.extend(series.appliances())
    if NOISE in series.channels:
        entities.append(NOISE)
    columns = []
    for entity in entities:
        for signal in SIGNALS:
            if signal in series.channels[entity]:
                columns.append((entity, signal))
    with open(path, "w", newline="") as fh:
        fh.write("timestamp," + ",".join(f"{e}_{s}" for e, s in columns) + "\n")
        for i in range(len(series)):
            row = [str(int(series.timestamps[i]))]
            row.extend(repr(float(series.channels[e][s][i])) for e, s in columns)
            fh.write(",".join(row) + "\n")


# -- scenarios -----------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """What to disaggregate and from which measurements.

    ``denoised`` mode feeds the network the sum of the target loads'
    ground truth; ``noisy`` mode feeds the actual aggregate measurement,
    so everything the non-target loads draw acts as noise.
    """

    mode: str
    target_loads: tuple
    input_signals: tuple
    output_signal: str

    def __post_init__(self):
        object.__setattr__(self, "target_loads", tuple(self.target_loads))
        object.__setattr__(self, "input_signals", tuple(self.input_signals))
        if self.mode not in ("noisy", "denoised"):
            raise ValueError(f"scenario mode must be noisy or denoised, got {self.mode!r}")
        if not self.target_loads:
            raise ValueError("scenario needs at least one target load")
        if not self.input_signals:
            raise ValueError("scenario needs at least one input signal")
        for s in self.input_signals:
            if s not in SIGNALS:
                raise ValueError(f"unknown input signal {s!r}; expected one of {SIGNALS}")
        if self.output_signal not in SIGNALS:
            raise ValueError(f"unknown output signal {self.output_signal!r}")
        if self.output_signal not in self.input_signals:
            raise ValueError(
                f"output signal {self.output_signal!r} must be one of the "
                f"input signals {self.input_signals} (it is the masked channel)")

    @property
    def mask_channel(self):
        return self.input_signals.index(self.output_signal)


@dataclass
class ScenarioTensors:
    """Network-ready series: inputs [time, channels], targets [time, loads]."""

    inputs: np.ndarray
    targets: np.ndarray
    scenario: Scenario

    @property
    def mask_channel(self):
        return self.scenario.mask_channel


def build_scenario(series: MeterSeries, scenario: Scenario) -> ScenarioTensors:
    """Assemble input and target series for a scenario."""
    for load in scenario.target_loads:
        if load not in series.channels:
            raise ValueError(f"target load {load!r} has no sub-meter data")
        if scenario.output_signal not in series.channels[load]:
            raise ValueError(
                f"target load {load!r} lacks the {scenario.output_signal} signal")
    n = len(series)
    inputs = np.empty((n, len(scenario.input_signals)), dtype=np.float64)
    for ci, signal in enumerate(scenario.input_signals):
        if scenario.mode == "denoised":
            acc = np.zeros(n, dtype=np.float64)
            for load in scenario.target_loads:
                if signal not in series.channels[load]:
                    raise ValueError(f"target load {load!r} lacks the {signal} signal")
                acc += series.channels[load][signal]
            inputs[:, ci] = acc
        else:
            if AGGREGATE not in series.channels or signal not in series.channels[AGGREGATE]:
                raise ValueError(f"series lacks aggregate signal {signal}")
            inputs[:, ci] = series.channels[AGGREGATE][signal]
    targets = np.stack(
        [series.channels[load][scenario.output_signal] for load in scenario.target_loads],
        axis=1)
    return ScenarioTensors(inputs, targets, scenario)


# -- normalization -------------------------------------------------------


def next_power_of_two(value: float) -> float:
    """Smallest power of two >= value (a power of two maps to itself)."""
    if value <= 0:
        raise ValueError(f"need a positive value, got {value}")
    return float(2.0 ** math.ceil(math.log2(value)))


@dataclass
class ScaleRecord:
    """Per-channel divisors used to map the meter range into [0, 1]."""

    input_scales: np.ndarray
    target_scale: float

    def to_dict(self):
        return {
            "input_scales": [float(s) for s in self.input_scales],
            "target_scale": float(self.target_scale),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["input_scales"], dtype=np.float64),
                   float(d["target_scale"]))


def normalize(tensors: ScenarioTensors, scales: ScaleRecord | None = None):
    """Scale each input channel by the next power of two above its maximum.

    Targets share the scale of the masked input channel so predictions
    (mask times masked input) and targets stay in the same units. Scaling
    by powers of two is exact in binary floating point, so
    de-normalization is an exact round trip. Pass a previous `scales`
    record to reuse training-time scales at evaluation.
    """
    if tensors.inputs.size == 0:
        raise ValueError("cannot normalize an empty series")
    if scales is None:
        input_scales = np.empty(tensors.inputs.shape[1], dtype=np.float64)
        for ci in range(tensors.inputs.shape[1]):
            peak = float(np.max(np.abs(tensors.inputs[:, ci])))
            if peak <= 0.0:
                warnings.warn(
                    f"input channel {ci} ({tensors.scenario.input_signals[ci]}) "
                    f"is all zero; scale set to 1")
                input_scales[ci] = 1.0
            else:
                input_scales[ci] = next_power_of_two(peak)
        scales = ScaleRecord(input_scales, float(input_scales[tensors.mask_channel]))
    scaled = ScenarioTensors(
        tensors.inputs / scales.input_scales,
        tensors.targets / scales.target_scale,
        tensors.scenario)
    return scaled, scales


def denormalize(values, scale):
    return values * scale


# -- windowing -----------------------------------------------------------


def window(values, length=1440, overlap=511):
    """Cut a [time, ...] series into overlapping windows of `length`.

    Consecutive windows advance by ``length - overlap`` and the final
    window is aligned to the series end, so with overlap equal to the
    warm-up span every post-warm-up index lands in at least one window's
    loss region. Returns ``(windows [n, length, ...], starts [n])``.
    """
    values = np.asarray(values)
    if length < 1:
        raise ValueError(f"window length must be >= 1, got {length}")
    if not 0 <= overlap < length:
        raise ValueError(f"overlap must be in [0, {length}), got {overlap}")
    steps = values.shape[0]
    if steps < length:
        raise ValueError(
            f"series of {steps} samples is shorter than one window ({length})")
    stride = length - overlap
    starts = list(range(0, steps - length + 1, stride))
    if starts[-1] != steps - length:
        starts.append(steps - length)
    windows = np.stack([values[s : s + length] for s in starts])
    return windows, np.asarray(starts)
