"""Growth-rate spectra and verified time evolution for gravity-stratified
viscous incompressible flow in a box."""

__version__ = "0.1.0"

from .core import (BoxDomain, GridMismatchError, ScalarField, StaggeredGrid,
                   VectorField)
from .profiles import (DensityProfile, ProfileError, ProfileFormatError,
                       parse_profile)
from .spectra import (AlphaCurve, EigenSolution, PhysicalParams,
                      SpectralContext, alpha, bump_certificate, energy_E,
                      energy_EN, lambda_N, s_upper_bracket)
from .growth import (GrowthOptions, GrowthRateResult, cross_check_lambda_N,
                     pde_residual, solve_growth_rate)
from .evolution import (LinearStepper, MonitorTrace, NonlinearStepper,
                        SimState, measure_growth_rate, stable_decay_report)
from .experiments import (EscapeTimeConfig, eigenmode_pair,
                          random_divfree_state, rate_resolving_dt,
                          run_escape_time, run_sharp_growth,
                          run_stability_suite)

__all__ = [
    "BoxDomain", "StaggeredGrid", "ScalarField", "VectorField",
    "GridMismatchError", "DensityProfile", "ProfileError",
    "ProfileFormatError", "parse_profile", "PhysicalParams",
    "SpectralContext", "alpha", "energy_E", "energy_EN", "lambda_N",
    "bump_certificate", "s_upper_bracket", "AlphaCurve", "EigenSolution",
    "GrowthOptions", "GrowthRateResult", "solve_growth_rate", "pde_residual",
    "cross_check_lambda_N", "SimState", "MonitorTrace", "LinearStepper",
    "NonlinearStepper", "measure_growth_rate", "stable_decay_report",
    "EscapeTimeConfig", "eigenmode_pair", "random_divfree_state",
    "run_escape_time", "rate_resolving_dt", "run_sharp_growth",
    "run_stability_suite",
]
