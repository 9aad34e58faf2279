"""hamlearn: learning and forecasting Hamiltonian dynamics with
conventional and Hamiltonian neural networks."""

from ._version import VERSION as __version__
from .systems import SystemSpec, PhaseState, linear, quartic, chain
from .mlp import NetSpec, MlpParams, init_params, forward, input_gradient
from .dataset import Orbit, TrainingPair, generate_orbit, make_training_pairs
from .training import OptimizerConfig, TrainReport, train, nn_loss, hnn_loss
from .forecast import LearnedField, Trajectory, integrate, learned_vector_field
from .metrics import (
    Aggregate,
    ErrorRecord,
    aggregate,
    energy_relative_error,
    fit_power_law,
    state_error,
)
from .estimators import HamiltonianRegressor, VectorFieldRegressor
from .harness import ExperimentConfig, run_cell, sweep, ratio_surface

__all__ = [
    "__version__",
    "SystemSpec", "PhaseState", "linear", "quartic", "chain",
    "NetSpec", "MlpParams", "init_params", "forward", "input_gradient",
    "Orbit", "TrainingPair", "generate_orbit", "make_training_pairs",
    "OptimizerConfig", "TrainReport", "train", "nn_loss", "hnn_loss",
    "LearnedField", "Trajectory", "integrate", "learned_vector_field",
    "Aggregate", "ErrorRecord", "aggregate", "energy_relative_error",
    "fit_power_law", "state_error",
    "HamiltonianRegressor", "VectorFieldRegressor",
    "ExperimentConfig", "run_cell", "sweep", "ratio_surface",
]
