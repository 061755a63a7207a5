"""Pulse-vaccinated SIR model with seasonal forcing.

Closed-form thresholds and stroboscopic maps, exact-landing impulsive
integration, Floquet multipliers, regime classification over the (T, p)
plane and Lyapunov-exponent chaos indicators.
"""

__version__ = "0.1.0"

from .model import DomainError, ExistenceError, ModelParams, SeasonalForcing, State, apply_impulse, beta_gamma, vector_field
from .closedform import FloquetPair, RegimeLabel, classify_analytic, floquet_analytic, thresholds
from .integrator import IntegrationError, IntegratorConfig, Trajectory, integrate, integrate_suspended, monodromy_numeric
from .analysis import classify_empirical, find_endemic_orbit, lyapunov_max, poincare_section, sweep_bifurcation_plane

__all__ = [
    "DomainError",
    "ExistenceError",
    "ModelParams",
    "SeasonalForcing",
    "State",
    "apply_impulse",
    "beta_gamma",
    "vector_field",
    "FloquetPair",
    "RegimeLabel",
    "classify_analytic",
    "floquet_analytic",
    "thresholds",
    "IntegrationError",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "integrate_suspended",
    "monodromy_numeric",
    "classify_empirical",
    "find_endemic_orbit",
    "lyapunov_max",
    "poincare_section",
    "sweep_bifurcation_plane",
]
