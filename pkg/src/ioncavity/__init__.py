"""Trapped-ion strings in a standing-wave cavity: chain equilibria, normal
modes, emission visibility, fits and geometry optimisation."""

__version__ = "0.1.0"

from .config import CONSTANTS, ConfigError, TrapConfig, load_config, make_config
from .chain import (
    ChainSolution,
    ChainSolverError,
    ThermalState,
    equilibrium_positions,
    length_scale,
    normal_modes,
    solve_chain,
    thermal_spreads,
    verify_localisation_theorem,
)
from .coupling import (
    CouplingModel,
    CouplingReport,
    VisibilityCurve,
    VisibilityPoint,
    average_coupling,
    build_model,
    coupling_strength,
    emission_profile,
    optimise_frequency,
    visibility,
    visibility_curve,
)
from .scan import ScanTrace, simulate_scan, simulate_visibility_dataset
from .fitting import CurveFit, FitError, ScanFit, fit_scan, fit_visibility_curve
