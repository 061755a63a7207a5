"""Model parameters, seasonal forcing and the impulsive SIR vector field.

Between pulses the state (S, I, R) follows

    S' = S (A - S) - beta(t) I S
    I' = beta(t) I S - (sigma + g) I
    R' = g I - mu R

with beta(t) = beta0 (1 + gamma Psi(omega t)).  At every t = nT a fraction p
of the susceptibles is moved to R.

``sigma`` is the combined removal rate of infectives (natural death plus
disease death).  ``mu`` only enters the R equation; it defaults to ``sigma``
(no disease-induced death) because the (S, I) dynamics never depend on it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

__all__ = [
    "DomainError",
    "ExistenceError",
    "SeasonalForcing",
    "ModelParams",
    "State",
    "beta_gamma",
    "vector_field",
    "apply_impulse",
    "trapping_bound",
]


class DomainError(ValueError):
    """Raised for inputs outside the mathematical domain of an operation."""


class ExistenceError(ValueError):
    """Raised when a requested orbit or threshold does not exist."""


TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SeasonalForcing:
    """Periodic shape Psi of the transmission rate.

    ``shape="cos1"`` is Psi(u) = 1 + cos(u) with period 2*pi.  ``shape="table"``
    linearly interpolates ``values`` sampled at ``knots`` (first knot 0, last
    knot ``tau``), extended periodically.
    """

    shape: str = "cos1"
    tau: float = TWO_PI
    knots: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.shape == "cos1":
            if self.tau != TWO_PI:
                raise DomainError("cos1 forcing has period 2*pi")
        elif self.shape == "table":
            u = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if u.ndim != 1 or u.shape != v.shape or u.size < 3:
                raise DomainError("tabulated forcing needs >= 3 matching knots and values")
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise DomainError("tabulated forcing must be finite")
            if u[0] != 0.0 or np.any(np.diff(u) <= 0):
                raise DomainError("knots must start at 0 and be strictly increasing")
            if np.any(v <= 0):
                raise DomainError("forcing values must be strictly positive")
            if not math.isclose(v[0], v[-1], rel_tol=1e-9, abs_tol=1e-12):
                raise DomainError("tabulated forcing must be periodic (first value == last value)")
            object.__setattr__(self, "tau", float(u[-1]))
        else:
            raise DomainError(f"unknown forcing shape {self.shape!r}")

    @classmethod
    def from_file(cls, path) -> "SeasonalForcing":
        """Read a two-column (u, Psi) table; ``#`` lines and a text header are skipped."""
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                if rows:
                    raise DomainError(f"bad forcing table row: {line!r}") from None
        if not rows:
            raise DomainError(f"no data rows in {path}")
        knots, values = zip(*rows)
        return cls(shape="table", knots=tuple(knots), values=tuple(values))

    @property
    def code(self) -> int:
        return 0 if self.shape == "cos1" else 1

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self.shape == "cos1":
            return np.zeros(1), np.ones(1)
        return np.asarray(self.knots, dtype=float), np.asarray(self.values, dtype=float)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.shape == "cos1":
            out = 1.0 + np.cos(u)
        else:
            k, v = self.arrays()
            out = np.interp(np.mod(u, self.tau), k, v)
        return out if out.ndim else float(out)

    def spec(self) -> str:
        return "cos1" if self.shape == "cos1" else "table"


@dataclass(frozen=True)
class ModelParams:
    A: float
    beta0: float
    sigma: float
    g: float
    p: float = 0.0
    T: float = 1.0
    gamma: float = 0.0
    omega: float = 1.0
    mu: float | None = None
    psi: SeasonalForcing = field(default_factory=SeasonalForcing)

    def __post_init__(self):
        for name in ("A", "beta0", "sigma", "g", "p", "T", "gamma", "omega"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite real, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.mu is None:
            object.__setattr__(self, "mu", self.sigma)
        elif not math.isfinite(self.mu) or self.mu < 0:
            raise DomainError("mu must be finite and >= 0")
        else:
            object.__setattr__(self, "mu", float(self.mu))
        if not 0.0 < self.A <= 1.0:
            raise DomainError("A must lie in (0, 1]")
        if self.beta0 <= 0 or self.T <= 0 or self.omega <= 0:
            raise DomainError("beta0, T and omega must be > 0")
        if self.sigma < 0 or self.g < 0 or self.gamma < 0:
            raise DomainError("sigma, g and gamma must be >= 0")
        if not 0.0 <= self.p <= 1.0:
            raise DomainError("p must lie in [0, 1]")
        if self.sigma + self.g <= 0:
            raise DomainError("sigma + g must be > 0 so that S_c is positive")

    @property
    def removal(self) -> float:
        """sigma + g, the total exit rate of infectives."""
        return self.sigma + self.g

    @property
    def S_c(self) -> float:
        return (self.sigma + self.g) / self.beta0

    @property
    def R0(self) -> float:
        return self.A * self.beta0 / (self.sigma + self.g)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("A", "beta0", "sigma", "g", "mu", "p", "T", "gamma", "omega")}
        out["psi"] = self.psi.spec()
        if self.psi.shape == "table":
            out["psi_knots"] = list(self.psi.knots)
            out["psi_values"] = list(self.psi.values)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        psi = d.pop("psi", "cos1")
        knots = d.pop("psi_knots", None)
        values = d.pop("psi_values", None)
        forcing = SeasonalForcing() if psi == "cos1" else SeasonalForcing("table", knots=tuple(knots), values=tuple(values))
        return cls(psi=forcing, **d)


class State(NamedTuple):
    S: float
    I: float
    R: float = 0.0
    t: float = 0.0


def trapping_bound(params: ModelParams) -> float:
    """Upper bound on S + I inside the positively invariant region."""
    r = params.removal
    return params.A * (r + params.A) / r


def beta_gamma(params: ModelParams, t):
    """Seasonal transmission rate beta0 * (1 + gamma * Psi(omega t))."""
    if params.gamma == 0.0:
        return params.beta0 if np.ndim(t) == 0 else np.full(np.shape(t), params.beta0)
    return params.beta0 * (1.0 + params.gamma * params.psi(params.omega * np.asarray(t, dtype=float)))


def vector_field(params: ModelParams, s: State) -> tuple[float, float, float]:
    S, I, R, t = (float(x) for x in s)
    if not all(math.isfinite(x) for x in (S, I, R, t)):
        raise DomainError(f"non-finite state {s!r}")
    if S < 0 or I < 0 or S + I > trapping_bound(params) * (1 + 1e-9):
        warnings.warn("state outside the trapping region", RuntimeWarning, stacklevel=2)
    beta = float(beta_gamma(params, t))
    dS = S * (params.A - S) - beta * I * S
    dI = beta * I * S - params.removal * I
    dR = params.g * I - params.mu * R
    return dS, dI, dR


def apply_impulse(params: ModelParams, s: State) -> State:
    """Vaccinate a fraction p of the susceptibles; the total S+I+R is unchanged."""
    moved = params.p * s.S
    return State(s.S - moved, s.I, s.R + moved, s.t)
