"""Closed-form results for the unforced pulse-vaccinated system.

Everything here is evaluated directly from formulas; numerical quadrature is
used only for the seasonal threshold, whose integrand has no primitive.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .model import DomainError, ExistenceError, ModelParams

__all__ = [
    "RegimeLabel",
    "FloquetPair",
    "FixedPoints",
    "Thresholds",
    "logistic_between_pulses",
    "strobe_S",
    "fixed_points_S",
    "disease_free_periodic_S",
    "disease_free_integral",
    "strobe_I_growth_factor",
    "p1",
    "p2",
    "T1",
    "T2",
    "thresholds",
    "reproduction_number_Rp",
    "p2_seasonal",
    "floquet_analytic",
    "endemic_equilibrium",
    "classify_analytic",
]

# relative slack used to decide that p sits on a bifurcation curve
BOUNDARY_RTOL = 1e-12


class RegimeLabel(str, enum.Enum):
    FULL_COVERAGE = "full_coverage"
    TRIVIAL_DISEASE_FREE = "trivial_disease_free"
    NONTRIVIAL_DISEASE_FREE = "nontrivial_disease_free"
    ENDEMIC_PERIODIC = "endemic_periodic"
    ENDEMIC_EQUILIBRIUM = "endemic_equilibrium"
    SADDLE_NODE = "saddle_node_boundary"
    TRANSCRITICAL = "transcritical_boundary"
    CHAOTIC = "chaotic"
    UNDETERMINED = "undetermined"

    @property
    def region(self) -> int | None:
        """Region number 1..5 of the (T, p) diagram, None for the other labels."""
        return _REGION.get(self)

    def __str__(self):
        return self.value


_REGION = {
    RegimeLabel.FULL_COVERAGE: 1,
    RegimeLabel.TRIVIAL_DISEASE_FREE: 2,
    RegimeLabel.NONTRIVIAL_DISEASE_FREE: 3,
    RegimeLabel.ENDEMIC_PERIODIC: 4,
    RegimeLabel.ENDEMIC_EQUILIBRIUM: 5,
}


@dataclass(frozen=True)
class FloquetPair:
    lambda1: float
    lambda2: float
    orbit: str

    @property
    def stable(self) -> bool:
        return abs(self.lambda1) < 1 and abs(self.lambda2) < 1

    def as_tuple(self) -> tuple[float, float]:
        return self.lambda1, self.lambda2


@dataclass(frozen=True)
class FixedPoints:
    x1_star: float
    x2_star: float
    physical: bool


@dataclass(frozen=True)
class Thresholds:
    S_c: float
    R0: float
    p1: float
    p2: float | None
    T1: float | None
    T2: float | None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("S_c", "R0", "p1", "p2", "T1", "T2")}


def logistic_between_pulses(A: float, S0: float, dt: float) -> float:
    """Solution of S' = S(A - S) after time ``dt`` from ``S0``."""
    if not 0.0 <= S0 <= A:
        raise DomainError(f"S0={S0} outside [0, A={A}]")
    if dt < 0:
        raise DomainError("dt must be >= 0")
    if S0 == 0.0:
        return 0.0
    return A * S0 / (S0 + (A - S0) * math.exp(-A * dt))


def strobe_S(params: ModelParams, x: float) -> float:
    """Post-pulse to post-pulse map of S on the disease-free manifold."""
    if x < 0:
        raise DomainError("x must be >= 0")
    A = params.A
    eAT = math.exp(A * params.T)
    return A * x * (1.0 - params.p) * eAT / (x * (eAT - 1.0) + A)


def fixed_points_S(params: ModelParams) -> FixedPoints:
    A = params.A
    # e^{AT}/(e^{AT}-1) = 1/(1-e^{-AT}) avoids overflow for large AT
    x1 = A * (1.0 - params.p / -math.expm1(-A * params.T))
    return FixedPoints(x1, 0.0, x1 > 0)


def p1(T, A: float):
    return -np.expm1(-A * np.asarray(T, dtype=float)) if np.ndim(T) else -math.expm1(-A * T)


def p2(T, A: float, S_c: float):
    if A <= S_c:
        raise ExistenceError("p2 is undefined when A <= S_c (R0 <= 1)")
    return -np.expm1(-(A - S_c) * np.asarray(T, dtype=float)) if np.ndim(T) else -math.expm1(-(A - S_c) * T)


def T1(p, A: float):
    return np.abs(np.log1p(-np.asarray(p, dtype=float))) / A if np.ndim(p) else abs(math.log1p(-p)) / A


def T2(p, A: float, S_c: float):
    if A <= S_c:
        raise ExistenceError("T2 is undefined when A <= S_c (R0 <= 1)")
    if np.ndim(p):
        return np.abs(np.log1p(-np.asarray(p, dtype=float))) / (A - S_c)
    return abs(math.log1p(-p)) / (A - S_c)


def thresholds(params: ModelParams) -> Thresholds:
    A, S_c, T, p = params.A, params.S_c, params.T, params.p
    endemic = A > S_c
    t1 = T1(p, A) if p < 1 else math.inf
    t2 = (T2(p, A, S_c) if p < 1 else math.inf) if endemic else None
    return Thresholds(
        S_c=S_c,
        R0=params.R0,
        p1=p1(T, A),
        p2=p2(T, A, S_c) if endemic else None,
        T1=t1,
        T2=t2,
    )


def _require_orbit(params: ModelParams):
    if params.p >= p1(params.T, params.A):
        raise ExistenceError(
            f"no positive disease-free periodic orbit: p={params.p} >= p1(T)={p1(params.T, params.A)}"
        )


def disease_free_periodic_S(params: ModelParams, t, *, since_pulse: bool = False):
    """The T-periodic susceptible profile of the disease-free orbit (I = 0).

    With ``since_pulse`` the argument is the time elapsed since the last
    pulse, in [0, T]; ``T`` then gives the left limit just before the next jump.
    """
    _require_orbit(params)
    A, T, p = params.A, params.T, params.p
    # divide through by e^{AT}: A[(1-p) - e^{-AT}] / [(1-p) - e^{-AT} + p e^{-A tau}]
    c = (1.0 - p) - math.exp(-A * T)
    tau = np.asarray(t, dtype=float) if since_pulse else np.mod(np.asarray(t, dtype=float), T)
    out = A * c / (c + p * np.exp(-A * tau))
    return out if out.ndim else float(out)


def disease_free_integral(params: ModelParams) -> float:
    """Integral of the disease-free susceptible profile over one period."""
    _require_orbit(params)
    return math.log1p(-params.p) + params.A * params.T


def strobe_I_growth_factor(params: ModelParams, mean_S_integral: float) -> float:
    """Per-period multiplication of I given the period integral of S."""
    return math.exp(params.beta0 * mean_S_integral - params.removal * params.T)


def reproduction_number_Rp(params: ModelParams) -> float:
    """Basic reproduction number under pulse vaccination; -inf at p = 1."""
    if params.p == 1.0:
        return -math.inf
    return params.R0 * (math.log1p(-params.p) / (params.A * params.T) + 1.0)


def p2_seasonal(params: ModelParams, *, epsabs: float = 1e-10, limit: int = 40) -> float:
    """Vaccination threshold above which the disease-free orbit is stable under forcing."""
    if params.A <= params.S_c:
        raise ExistenceError("seasonal threshold needs A > S_c")
    _require_orbit(params)
    base = (params.A - params.S_c) * params.T
    if params.gamma == 0.0:
        return -math.expm1(-base)

    def integrand(t):
        return params.psi(params.omega * t) * disease_free_periodic_S(params, t)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(integrand, 0.0, params.T, epsabs=epsabs, epsrel=0.0, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise ArithmeticError(f"seasonal threshold quadrature did not converge: {exc}") from None
    return -math.expm1(-(base + params.gamma * value))


def floquet_analytic(params: ModelParams, orbit: str = "disease-free-periodic") -> FloquetPair:
    A, T, p, r, b = params.A, params.T, params.p, params.removal, params.beta0
    if orbit == "origin":
        return FloquetPair((1.0 - p) * math.exp(A * T), math.exp(-r * T), "origin")
    if orbit != "disease-free-periodic":
        raise DomainError(f"unknown orbit {orbit!r}")
    _require_orbit(params)
    integral = disease_free_integral(params)
    lam1 = math.exp(-A * T) / (1.0 - p)
    lam2 = math.exp(b * integral - r * T)
    return FloquetPair(lam1, lam2, "disease-free-periodic")


def endemic_equilibrium(params: ModelParams) -> tuple[float, float]:
    """Interior equilibrium of the system without vaccination and forcing."""
    b, r = params.beta0, params.removal
    if params.A <= params.S_c:
        raise ExistenceError("no endemic equilibrium when R0 <= 1")
    return r / b, (params.A * b - r) / b**2


def _on(p: float, curve: float) -> bool:
    return abs(p - curve) <= BOUNDARY_RTOL * max(1.0, abs(curve))


def classify_analytic(params: ModelParams) -> RegimeLabel:
    """Region of the (T, p) diagram for the unforced model."""
    if params.gamma != 0.0:
        raise DomainError("analytic classification requires gamma == 0; use the empirical classifier")
    p = params.p
    c1 = p1(params.T, params.A)
    if p == 1.0:
        return RegimeLabel.FULL_COVERAGE
    if _on(p, c1):
        return RegimeLabel.SADDLE_NODE
    if p > c1:
        return RegimeLabel.TRIVIAL_DISEASE_FREE
    if params.A <= params.S_c:
        # R0 <= 1: infection dies out for every p below p1 (p = 0 gives S -> A)
        return RegimeLabel.NONTRIVIAL_DISEASE_FREE
    c2 = p2(params.T, params.A, params.S_c)
    if _on(p, c2):
        return RegimeLabel.TRANSCRITICAL
    if p > c2:
        return RegimeLabel.NONTRIVIAL_DISEASE_FREE
    if p == 0.0:
        return RegimeLabel.ENDEMIC_EQUILIBRIUM
    return RegimeLabel.ENDEMIC_PERIODIC
