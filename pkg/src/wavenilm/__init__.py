"""Causal gated dilated-convolution network for non-intrusive load
monitoring: training, constant-memory streaming inference, and
Estimated Accuracy evaluation, with a synthetic household generator for
desk-scale verification."""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import (MeterSeries, ScaleRecord, Scenario, ScenarioTensors,
                   build_scenario, ingest_csv, normalize, window, write_csv)
from .gradcheck import GradientCheckReport, gradient_check
from .kernels import BACKEND, HAVE_NUMBA
from .metrics import AccuracyReport, estimated_accuracy, mean_report
from .network import (NetworkConfig, Network, build_network,
                      parameter_count_for_config, receptive_field)
from .streaming import StreamState, init_stream, step
from .synth import (ApplianceState, HouseholdSpec, SyntheticAppliance,
                    load_household_config, synthesize_household,
                    two_state_appliance)
from .training import (Adam, TrainConfig, TrainResult, cross_validate,
                       evaluate_windows, mse_loss, mse_loss_grad, split_series,
                       train)

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport", "Adam", "ApplianceState", "BACKEND",
    "GradientCheckReport", "HAVE_NUMBA", "HouseholdSpec", "MeterSeries",
    "Network", "NetworkConfig", "ScaleRecord", "Scenario", "ScenarioTensors",
    "StreamState", "SyntheticAppliance", "TrainConfig", "TrainResult",
    "build_network", "build_scenario", "cross_validate", "estimated_accuracy",
    "evaluate_windows", "gradient_check", "ingest_csv", "init_stream",
    "load_checkpoint", "load_household_config", "mean_report", "mse_loss",
    "mse_loss_grad", "normalize", "parameter_count_for_config",
    "receptive_field", "save_checkpoint", "split_series", "step",
    "synthesize_household", "train", "two_state_appliance", "window",
    "write_csv",
]
