"""Finite-difference simulation and spectral checks for a three-layer
piezoelectric sandwich beam under boundary voltage feedback."""
from .config import (
    DEFAULT_COMPOSITE,
    BeamCoefficients,
    RawMaterialConstants,
    derive_coefficients,
    reference_coefficients,
    time_scale,
)
from .controller import ControllerConfig
from .grid import Grid, apply_stencil, build_grid
from .model import BeamState, SchemeOptions, SemiDiscreteSystem, assemble, bump_initial_state, rhs, solve_phi_constraint
from .sigma import SigmaOperators, apply_J, apply_P_kernel, apply_P_solve
from .spectral import DiscreteGenerator, assemble_generator, dissipativity_check, spectral_abscissa, spectrum
from .time_march import IntegratorConfig, SimulationTrace, energy, fit_decay_rate, run, step

__version__ = "0.1.0"
