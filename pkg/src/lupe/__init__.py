"""Stochastic primitive equations with transport noise: pseudo-spectral solver."""

from .grid import Grid, build_grid
from .fields import ScalarField3D, StateU
from .noise import ModeSpec, NoiseModel, build_noise_model
from .operators import Coefs, FilterKernel, gaussian_filter
from .closures import ClosureSpec
from .stepper import Problem, SchemeSpec, Trajectory, initial_state, run, run_ensemble
from .diagnostics import DiagnosticsRecord, record
from .config import RunConfig, parse_config

__all__ = [
    "Grid", "build_grid", "ScalarField3D", "StateU",
    "ModeSpec", "NoiseModel", "build_noise_model",
    "Coefs", "FilterKernel", "gaussian_filter", "ClosureSpec",
    "Problem", "SchemeSpec", "Trajectory", "initial_state", "run",
    "run_ensemble", "DiagnosticsRecord", "record", "RunConfig", "parse_config",
]
__version__ = "0.1.0"
