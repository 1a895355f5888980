"""Pseudo-spectral lab for the Gardner equation and its mKdV-with-background form."""
from .evolve import (
    Equation,
    EvolveConfig,
    NonFiniteError,
    ScalingParams,
    Simulation,
    conserved,
    local_time_estimate,
    scale_down,
    scale_up,
)
from .grid import Field, GridSpec, SpaceTimeField, sobolev_norm, xsb_norm
from .solitons import SolitonParams, build_linearized_operator, soliton_profile, soliton_state, wave_velocity
from .stability import DegenerateDenominator, RootLost, StabilityRun, d_second, stability_experiment

__version__ = "0.1.0"

__all__ = [
    "DegenerateDenominator", "Equation", "EvolveConfig", "Field", "GridSpec", "NonFiniteError", "RootLost",
    "ScalingParams", "Simulation", "SolitonParams", "SpaceTimeField", "StabilityRun", "build_linearized_operator",
    "conserved", "d_second", "local_time_estimate", "scale_down", "scale_up", "sobolev_norm",
    "soliton_profile", "soliton_state", "stability_experiment", "wave_velocity", "xsb_norm",
]
