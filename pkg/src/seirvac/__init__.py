"""Observer-based vaccination control of a true-mass-action SEIR epidemic.

The package simulates a four-compartment epidemic together with a
parallel-model state estimator, feeds estimated populations into a family
of vaccination feedback laws, and certifies stability/positivity of the
resulting closed loop from frozen-matrix spectra, transfer-function peaks
and perturbation-norm budgets.
"""

from ._kernels import NUMBA_ACTIVE
from .analysis import (
    AffineVectors,
    Decomposition,
    DecompositionAnchors,
    RootConvergenceError,
    StabilityReport,
    SystemMatrices,
    affine_vectors_and_bounds,
    build_decomposition,
    build_system_matrices,
    certify,
    characteristic_polynomial,
    hinf_norm_hhat,
    hurwitz_check,
    matrix_exponential,
    metzler_check,
    perturbation_block,
    polynomial_from_roots,
    polynomial_roots,
    spectral_norm,
    stability_abscissa,
    transient_constant,
    transient_envelope,
)
from .control import (
    ControlGains,
    FeasibilityReport,
    TrackingGainConfig,
    TrackingGainState,
    gain_feasibility,
    tracking_forcing_column,
    tracking_gain_step,
    vaccination_full,
    vaccination_restricted,
    vaccination_switched,
)
from .model import (
    EpidemicParams,
    PopulationState,
    forced_equilibrium,
    seir_derivative,
    validate_params,
)
from .observer import (
    ObserverParams,
    ObserverState,
    observation_error,
    observer_derivative,
    validate_observer_params,
)
from .simulate import (
    ConfigurationError,
    EnvelopeDiagnostics,
    SimulationAborted,
    SimulationConfig,
    Trajectory,
    TrajectoryDiagnostics,
    compute_diagnostics,
    rk4_step,
    run_scenario,
    scenario_config,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "AffineVectors",
    "ConfigurationError",
    "ControlGains",
    "Decomposition",
    "DecompositionAnchors",
    "EnvelopeDiagnostics",
    "EpidemicParams",
    "FeasibilityReport",
    "NUMBA_ACTIVE",
    "ObserverParams",
    "ObserverState",
    "PopulationState",
    "RootConvergenceError",
    "SimulationAborted",
    "SimulationConfig",
    "StabilityReport",
    "SystemMatrices",
    "Trajectory",
    "TrajectoryDiagnostics",
    "TrackingGainConfig",
    "TrackingGainState",
    "affine_vectors_and_bounds",
    "build_decomposition",
    "build_system_matrices",
    "certify",
    "characteristic_polynomial",
    "compute_diagnostics",
    "forced_equilibrium",
    "gain_feasibility",
    "hinf_norm_hhat",
    "hurwitz_check",
    "matrix_exponential",
    "metzler_check",
    "observation_error",
    "observer_derivative",
    "perturbation_block",
    "polynomial_from_roots",
    "polynomial_roots",
    "rk4_step",
    "run_scenario",
    "scenario_config",
    "seir_derivative",
    "simulate",
    "spectral_norm",
    "stability_abscissa",
    "tracking_forcing_column",
    "tracking_gain_step",
    "transient_constant",
    "transient_envelope",
    "vaccination_full",
    "vaccination_restricted",
    "vaccination_switched",
    "validate_observer_params",
    "validate_params",
    "__version__",
]
