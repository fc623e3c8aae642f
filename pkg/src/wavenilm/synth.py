"""Synthetic household generator for desk-scale verification.

Each appliance is a per-minute Markov chain over a few states, each
state carrying an active-power level and a phase angle. Per-appliance
channels follow the power triangle: S = P / cos(theta), Q = P *
tan(theta), I = S / V at nominal voltage. The aggregate is the sum of
the appliances plus Gaussian jitter on P and Q (clamped so the aggregate
stays nonnegative); aggregate S and I are derived from aggregate P and
Q. The residual of each aggregate channel over the appliance sum is
recorded as the ``noise`` entity, so the additive decomposition holds
exactly on every channel.
"""

import math
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import AGGREGATE, NOISE, SIGNALS, MeterSeries

DEFAULT_START_EPOCH = 1704067200  # 2024-01-01T00:00:00Z
MINUTES_PER_DAY = 1440


@dataclass(frozen=True)
class ApplianceState:
    power: float  # watts
    phase: float  # radians, [0, pi/2)

    def __post_init__(self):
        if self.power < 0:
            raise ValueError(f"state power must be >= 0, got {self.power}")
        if not 0.0 <= self.phase < math.pi / 2:
            raise ValueError(
                f"state phase must be in [0, pi/2), got {self.phase}")


@dataclass
class SyntheticAppliance:
    name: str
    states: tuple
    transitions: np.ndarray  # [n_states, n_states], row-stochastic, per minute
    start_state: int = 0

    def __post_init__(self):
        self.states = tuple(self.states)
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        n = len(self.states)
        if n == 0:
            raise ValueError(f"appliance {self.name!r} needs at least one state")
        if self.transitions.shape != (n, n):
            raise ValueError(
                f"appliance {self.name!r}: transition matrix shape "
                f"{self.transitions.shape} does not match {n} states")
        if np.any(self.transitions < 0) or np.any(
                np.abs(self.transitions.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError(
                f"appliance {self.name!r}: transition rows must be "
                f"nonnegative and sum to 1")
        if not 0 <= self.start_state < n:
            raise ValueError(f"appliance {self.name!r}: bad start_state")

    def simulate(self, steps, rng):
        """State index per minute."""
        cumulative = np.cumsum(self.transitions, axis=1)
        out = np.empty(steps, dtype=np.int64)
        state = self.start_state
        draws = rng.random(steps)
        for t in range(steps):
            out[t] = state
            state = int(np.searchsorted(cumulative[state], draws[t], side="right"))
            state = min(state, len(self.states) - 1)
        return out


def two_state_appliance(name, power, phase, on_prob=0.05, off_prob=0.10,
                        start_state=0):
    """Convenience: off/on appliance with per-minute switch probabilities."""
    return SyntheticAppliance(
        name=name,
        states=(ApplianceState(0.0, 0.0), ApplianceState(power, phase)),
        transitions=np.array([[1.0 - on_prob, on_prob],
                              [off_prob, 1.0 - off_prob]]),
        start_state=start_state,
    )


@dataclass
class HouseholdSpec:
    appliances: list
    days: int = 1
    voltage: float = 120.0
    noise_p_sigma: float = 0.0
    noise_q_sigma: float = 0.0
    seed: int = 0
    start_epoch: int = DEFAULT_START_EPOCH

    def synthesize(self, seed=None) -> MeterSeries:
        return synthesize_household(
            self.appliances, self.days, self.voltage,
            noise_p_sigma=self.noise_p_sigma, noise_q_sigma=self.noise_q_sigma,
            seed=self.seed if seed is None else seed,
            start_epoch=self.start_epoch)


def synthesize_household(appliances, days, v_nominal=120.0, *,
                         noise_p_sigma=0.0, noise_q_sigma=0.0, seed=0,
                         start_epoch=DEFAULT_START_EPOCH,
                         step_seconds=60) -> MeterSeries:
    """Simulate `days` of one-minute samples for the given appliances.

    Fully reproducible from `seed`; each appliance draws from its own
    seed-derived stream, so adding an appliance does not reshuffle the
    others.
    """
    if not appliances and (noise_p_sigma or noise_q_sigma):
        pass  # a noise-only household is allowed
    if days < 1:
        raise ValueError(f"days must be >= 1, got {days}")
    if v_nominal <= 0:
        raise ValueError(f"voltage must be positive, got {v_nominal}")
    names = [a.name for a in appliances]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate appliance names in {names}")

    steps = days * MINUTES_PER_DAY
    channels = {}
    for idx, appliance in enumerate(appliances):
        rng = np.random.default_rng([seed, idx])
        state_idx = appliance.simulate(steps, rng)
        power_by_state = np.array([s.power for s in appliance.states])
        phase_by_state = np.array([s.phase for s in appliance.states])
        p = power_by_state[state_idx]
        theta = phase_by_state[state_idx]
        q = p * np.tan(theta)
        s = p / np.cos(theta)
        channels[appliance.name] = {
            "P": p, "Q": q, "S": s, "I": s / v_nominal,
        }

    # Sum in sorted-name order; consumers iterating MeterSeries.appliances()
    # reproduce the aggregate decomposition bit for bit.
    sorted_names = sorted(names)
    sums = {}
    for signal in SIGNALS:
        if sorted_names:
            sums[signal] = np.sum(
                np.stack([channels[n][signal] for n in sorted_names]), axis=0)
        else:
            sums[signal] = np.zeros(steps)

    jitter_rng = np.random.default_rng([seed, 1 << 20])
    jitter_p = jitter_rng.normal(0.0, noise_p_sigma, steps) if noise_p_sigma else np.zeros(steps)
    jitter_q = jitter_rng.normal(0.0, noise_q_sigma, steps) if noise_q_sigma else np.zeros(steps)

    agg_p = np.maximum(sums["P"] + jitter_p, 0.0)
    agg_q = np.maximum(sums["Q"] + jitter_q, 0.0)
    agg_s = np.hypot(agg_p, agg_q)
    agg_i = agg_s / v_nominal
    aggregate = {"P": agg_p, "Q": agg_q, "S": agg_s, "I": agg_i}
    channels[AGGREGATE] = aggregate
    channels[NOISE] = {
        signal: aggregate[signal] - sums[signal] for signal in SIGNALS
    }

    timestamps = start_epoch + step_seconds * np.arange(steps, dtype=np.int64)
    return MeterSeries(timestamps, channels, step_seconds)


def demo_household() -> HouseholdSpec:
    """Example household: five deferrable-style target loads plus enough
    background (non-target) loads that, averaged over time, roughly 60%
    of the aggregate comes from loads outside the deferrable set."""
    appliances = [
        two_state_appliance("heat_pump", 2000.0, 0.45, on_prob=0.030, off_prob=0.10),
        two_state_appliance("clothes_dryer", 2500.0, 0.10, on_prob=0.010, off_prob=0.15),
        two_state_appliance("dishwasher", 1200.0, 0.15, on_prob=0.015, off_prob=0.12),
        two_state_appliance("wall_oven", 3000.0, 0.05, on_prob=0.008, off_prob=0.20),
        two_state_appliance("hvac", 1500.0, 0.50, on_prob=0.040, off_prob=0.08),
        # background loads (scenario noise)
        two_state_appliance("fridge", 150.0, 0.35, on_prob=0.50, off_prob=0.50),
        two_state_appliance("baseboard", 1800.0, 0.00, on_prob=0.045, off_prob=0.055),
        two_state_appliance("lighting", 400.0, 0.02, on_prob=0.06, off_prob=0.06),
        two_state_appliance("electronics", 350.0, 0.30, on_prob=0.14, off_prob=0.06),
        two_state_appliance("water_heater", 1300.0, 0.12, on_prob=0.035, off_prob=0.065),
        two_state_appliance("misc", 300.0, 0.20, on_prob=0.16, off_prob=0.04),
    ]
    return HouseholdSpec(appliances=appliances, days=2, voltage=120.0,
                         noise_p_sigma=10.0, noise_q_sigma=4.0, seed=77)


DEMO_TARGETS = ("heat_pump", "clothes_dryer", "dishwasher", "wall_oven", "hvac")


# -- config files ---------------------------------------------------------


def parse_household(raw: dict) -> HouseholdSpec:
    """Build a HouseholdSpec from a decoded household table (see
    :func:`load_household_config` for the file format)."""
    if "appliance" not in raw or not raw["appliance"]:
        raise ValueError("household config: no [[appliance]] tables")
    appliances = []
    for entry in raw["appliance"]:
        try:
            name = entry["name"]
            states = tuple(
                ApplianceState(float(s["power"]), float(s["phase"]))
                for s in entry["states"])
            transitions = entry["transitions"]
        except KeyError as exc:
            raise ValueError(
                f"household config: appliance entry missing field {exc}") from None
        appliances.append(SyntheticAppliance(
            name=name, states=states, transitions=transitions,
            start_state=int(entry.get("start_state", 0))))
    noise = raw.get("noise", {})
    return HouseholdSpec(
        appliances=appliances,
        days=int(raw.get("days", 1)),
        voltage=float(raw.get("voltage", 120.0)),
        noise_p_sigma=float(noise.get("p_sigma", 0.0)),
        noise_q_sigma=float(noise.get("q_sigma", 0.0)),
        seed=int(raw.get("seed", 0)),
        start_epoch=int(raw.get("start_epoch", DEFAULT_START_EPOCH)),
    )


def load_household_config(path) -> HouseholdSpec:
    """Read a TOML household description.

    Top-level keys: days, seed, voltage, optional [noise] table with
    p_sigma/q_sigma, and one [[appliance]] table per appliance carrying
    name, states (inline tables with power and phase), a row-stochastic
    transitions matrix, and an optional start_state.
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return parse_household(raw)
