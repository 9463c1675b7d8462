"""Monte Carlo wavefunction simulation of Grover search with Rydberg-blockaded atoms."""

from .analysis import MeasurementPolicy, aggregate, majority_vote, success_probability
from .config import PRESETS, ExperimentConfig
from .hilbert import RegisterConfig, Scheme, basis_index, initial_state
from .mcwf import IntegratorSettings, run_trajectories, run_trajectory
from .mesolve import evolve_me
from .model import DriveSettings, InteractionSpec, ModelContext, RelaxationRates
from .schedule import PulseParams, compile_algorithm, ideal_gate

__all__ = [
    "DriveSettings",
    "ExperimentConfig",
    "InteractionSpec",
    "IntegratorSettings",
    "MeasurementPolicy",
    "ModelContext",
    "PRESETS",
    "PulseParams",
    "RegisterConfig",
    "RelaxationRates",
    "Scheme",
    "aggregate",
    "basis_index",
    "compile_algorithm",
    "evolve_me",
    "ideal_gate",
    "initial_state",
    "majority_vote",
    "run_trajectories",
    "run_trajectory",
    "success_probability",
]
