"""Impulsive integration with exact landing on the pulse schedule.

Pulse instants nT are known in advance, so the flow is integrated segment by
segment between them with an adaptive Dormand-Prince 5(4) pair; each segment
ends exactly on the next pulse time and the jump is applied there.  No event
detection or interpolation across a jump ever happens.

Stored trajectories carry two rows at every pulse: the left limit
(``impulse == 1``) and the post-jump value (``impulse == 2``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from . import _kernel as K
from .closedform import FloquetPair, fixed_points_S
from .model import DomainError, ExistenceError, ModelParams, State, trapping_bound

__all__ = [
    "IntegrationError",
    "IntegratorConfig",
    "Trajectory",
    "TangentState",
    "Stretch",
    "integrate",
    "integrate_suspended",
    "integrate_segment",
    "monodromy_matrix",
    "monodromy_numeric",
    "strobe_map",
    "integrate_with_tangent",
]

INTERIOR, PRE_JUMP, POST_JUMP = 0, 1, 2


class IntegrationError(RuntimeError):
    """Integration failed; ``last_state`` is the last accepted (t, S, I, R)."""

    def __init__(self, message, last_state=None, diagnostics=None):
        super().__init__(message)
        self.last_state = last_state
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float | None = None
    dense_output_dt: float = 0.05
    max_clamps: int = 1000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise DomainError(f"{name} must lie in (0, 1e-2]")
        if self.max_step is not None and self.max_step <= 0:
            raise DomainError("max_step must be > 0")
        if self.dense_output_dt <= 0:
            raise DomainError("dense_output_dt must be > 0")

    def step_limit(self, T: float) -> float:
        cap = T / 4.0
        return cap if self.max_step is None else min(self.max_step, cap)

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_step": self.max_step,
            "dense_output_dt": self.dense_output_dt,
            "max_clamps": self.max_clamps,
        }


@dataclass
class Trajectory:
    t: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    impulse: np.ndarray
    params: ModelParams
    theta: np.ndarray | None = None
    n_steps: int = 0
    n_clamps: int = 0

    def __len__(self):
        return self.t.size

    @property
    def impulse_indices(self) -> np.ndarray:
        """Row index of the left-limit sample of every applied jump."""
        return np.flatnonzero(self.impulse == PRE_JUMP)

    def strobe(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Post-jump samples (t, S, I) at the pulse instants."""
        idx = self.impulse == POST_JUMP
        return self.t[idx], self.S[idx], self.I[idx]

    def states(self) -> list[State]:
        return [State(*row) for row in zip(self.S, self.I, self.R, self.t)]

    @property
    def final(self) -> State:
        return State(self.S[-1], self.I[-1], self.R[-1], self.t[-1])


@dataclass
class TangentState:
    base: State
    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))
    theta: float | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(self.matrix)):
            raise DomainError("tangent matrix must be finite")


class Stretch(NamedTuple):
    t: float
    log_growth: float
    reseeded: bool


class _Flow:
    """Compiled-kernel wrapper bound to one parameter set and configuration."""

    def __init__(self, params: ModelParams, config: IntegratorConfig, phase0: float = 0.0):
        self.params = params
        self.config = config
        knots, values = params.psi.arrays()
        self.knots = np.ascontiguousarray(knots)
        self.values = np.ascontiguousarray(values)
        par = np.zeros(K.NPAR)
        par[K.P_A] = params.A
        par[K.P_BETA0] = params.beta0
        par[K.P_REMOVAL] = params.removal
        par[K.P_G] = params.g
        par[K.P_MU] = params.mu
        par[K.P_GAMMA] = params.gamma
        par[K.P_OMEGA] = params.omega
        par[K.P_THETA0] = phase0
        par[K.P_PSI_KIND] = params.psi.code
        par[K.P_PSI_TAU] = params.psi.tau
        self.par = par
        self.max_step = config.step_limit(params.T)
        self.atol = np.full(K.NVAR, config.abs_tol)
        self.atol[4:] = config.abs_tol * 1e-3
        self.h = min(self.max_step, 1e-2)
        self.n_steps = 0
        self.n_clamps = 0

    def segment(self, y, t0, t1, tangent=False, sample_t=None):
        if sample_t is None:
            sample_t = _EMPTY
        samples = np.empty((sample_t.size, K.NVAR))
        y1, h, status, nst, ncl = K.integrate_segment(
            t0, t1, y, self.h, self.par, self.knots, self.values, tangent,
            self.config.rel_tol, self.atol, self.max_step, sample_t, samples,
        )
        self.h = h
        self.n_steps += nst
        self.n_clamps += ncl
        if status != K.STATUS_OK:
            what = "step size underflow" if status == K.STATUS_UNDERFLOW else "non-finite state"
            raise IntegrationError(
                f"{what} near t={t0 if nst == 0 else 'between %g and %g' % (t0, t1)}",
                last_state=State(y1[0], y1[1], y1[2], t0),
                diagnostics={"t0": t0, "t1": t1, "steps": self.n_steps, "clamps": self.n_clamps},
            )
        if self.n_clamps > self.config.max_clamps:
            raise IntegrationError(
                f"negative undershoot clamped {self.n_clamps} times",
                last_state=State(y1[0], y1[1], y1[2], t1),
                diagnostics={"steps": self.n_steps, "clamps": self.n_clamps},
            )
        return y1, samples

    def jump(self, y, tangent=False):
        moved = self.params.p * y[0]
        y[0] -= moved
        y[2] += moved
        if tangent:
            y[4] *= 1.0 - self.params.p
            y[5] *= 1.0 - self.params.p


_EMPTY = np.empty(0)


def _pulse_schedule(t0: float, t_end: float, T: float) -> tuple[list[float], float]:
    """Pulse instants in (t0, t_end]; t_end is snapped onto a pulse within roundoff."""
    n = math.floor(t0 / T) + 1
    if n * T <= t0:
        n += 1
    times = []
    slack = 1e-12 * max(1.0, abs(t_end))
    while n * T <= t_end + slack:
        times.append(n * T)
        n += 1
    if times and abs(times[-1] - t_end) <= slack:
        t_end = times[-1]
    return times, t_end


def _grid(t0: float, t1: float, dt: float) -> np.ndarray:
    k = np.arange(1, max(int(math.ceil((t1 - t0) / dt)), 1) + 1)
    g = t0 + k * dt
    return g[g < t1 - 1e-9 * dt]


def _check_initial(params: ModelParams, S: float, I: float, R: float):
    if not all(math.isfinite(v) for v in (S, I, R)):
        raise DomainError("initial state must be finite")
    if S < 0 or I < 0 or R < 0:
        raise DomainError("initial state must be nonnegative")
    if S > params.A * (1 + 1e-12) or S + I > trapping_bound(params) * (1 + 1e-12):
        warnings.warn("initial state outside the trapping region", RuntimeWarning, stacklevel=3)


def _run(params, config, S0, I0, R0, t0, t_end, phase0, theta0=None):
    if not t_end > t0:
        raise DomainError("t_end must exceed the initial time")
    _check_initial(params, S0, I0, R0)
    flow = _Flow(params, config, phase0)
    pulses, t_end = _pulse_schedule(t0, t_end, params.T)
    y = np.zeros(K.NVAR)
    y[:3] = S0, I0, R0
    ts, rows, flags = [np.array([t0])], [y[:3].copy()[None, :]], [np.array([INTERIOR], dtype=np.int8)]
    t = t0
    pulse_set = set(pulses)
    for b in pulses + ([] if t_end in pulse_set else [t_end]):
        grid = _grid(t, b, config.dense_output_dt)
        y, samples = flow.segment(y, t, b, sample_t=grid)
        ts.append(grid)
        rows.append(samples[:, :3])
        flags.append(np.zeros(grid.size, dtype=np.int8))
        if b in pulse_set:
            ts.append(np.array([b, b]))
            pre = y[:3].copy()
            flow.jump(y)
            rows.append(np.vstack([pre, y[:3]]))
            flags.append(np.array([PRE_JUMP, POST_JUMP], dtype=np.int8))
        else:
            ts.append(np.array([b]))
            rows.append(y[:3].copy()[None, :])
            flags.append(np.array([INTERIOR], dtype=np.int8))
        t = b
    t_all = np.concatenate(ts)
    data = np.vstack(rows)
    theta = None
    if theta0 is not None:
        theta = np.mod(theta0 + params.omega * (t_all - t0), K.TWO_PI)
    return Trajectory(
        t=t_all, S=data[:, 0], I=data[:, 1], R=data[:, 2], impulse=np.concatenate(flags),
        params=params, theta=theta, n_steps=flow.n_steps, n_clamps=flow.n_clamps,
    )


def integrate(params: ModelParams, config: IntegratorConfig, initial: State, t_end: float) -> Trajectory:
    """Integrate the (S, I, R) system from ``initial`` to ``t_end``.

    Seasonal forcing, if any, is evaluated at phase ``omega * t`` (absolute time).
    A pulse at the initial time itself is not applied.
    """
    s = State(*initial)
    return _run(params, config, float(s.S), float(s.I), float(s.R), float(s.t), float(t_end), 0.0)


def integrate_suspended(params: ModelParams, config: IntegratorConfig, initial, t_end: float, *, t0: float = 0.0) -> Trajectory:
    """Integrate the autonomous (S, I, theta) system, theta' = omega (mod 2 pi).

    ``initial`` is (S0, I0, theta0) or (S0, I0, theta0, R0).  Pulses do not touch theta.
    """
    S0, I0, theta0, *rest = initial
    R0 = rest[0] if rest else 0.0
    if params.gamma < 0:
        raise DomainError("gamma must be >= 0")
    phase0 = float(theta0) - params.omega * t0
    return _run(params, config, float(S0), float(I0), float(R0), float(t0), float(t_end), phase0, theta0=float(theta0))


def integrate_segment(params: ModelParams, config: IntegratorConfig, initial: State, t1: float) -> State:
    """Flow (without jumps) from ``initial.t`` to ``t1``; ``t1`` may lie in the past."""
    flow = _Flow(params, config)
    y = np.zeros(K.NVAR)
    y[:3] = initial.S, initial.I, initial.R
    y, _ = flow.segment(y, float(initial.t), float(t1))
    return State(y[0], y[1], y[2], float(t1))


def strobe_map(params: ModelParams, config: IntegratorConfig, x, *, jacobian: bool = False, t0: float = 0.0):
    """One period of the post-pulse stroboscopic map of (S, I).

    Returns the image, the integral of S over the period and, when requested,
    the 2x2 Jacobian (variational flow followed by the jump matrix).
    """
    flow = _Flow(params, config)
    y = np.zeros(K.NVAR)
    y[0], y[1] = x
    y[4], y[7] = 1.0, 1.0
    y, _ = flow.segment(y, t0, t0 + params.T, tangent=jacobian)
    flow.jump(y, tangent=jacobian)
    image = np.array([y[0], y[1]])
    if jacobian:
        return image, y[3], y[4:].reshape(2, 2).copy()
    return image, y[3]


def monodromy_matrix(params: ModelParams, config: IntegratorConfig, orbit: str = "disease-free-periodic") -> np.ndarray:
    if params.gamma != 0.0:
        raise DomainError("monodromy of the disease-free orbit needs gamma == 0")
    if orbit == "origin":
        x0 = 0.0
    elif orbit == "disease-free-periodic":
        fp = fixed_points_S(params)
        if not fp.physical:
            raise ExistenceError("disease-free periodic orbit needs p < p1(T)")
        x0 = fp.x1_star
    else:
        raise DomainError(f"unknown orbit {orbit!r}")
    _, _, M = strobe_map(params, config, (x0, 0.0), jacobian=True)
    return M


def monodromy_numeric(params: ModelParams, config: IntegratorConfig, orbit: str = "disease-free-periodic") -> FloquetPair:
    """Floquet multipliers from the numerically integrated variational system."""
    M = monodromy_matrix(params, config, orbit)
    if M[1, 0] == 0.0:
        # I = 0 is invariant, so the monodromy stays upper triangular
        lam1, lam2 = M[0, 0], M[1, 1]
    else:
        ev = np.linalg.eigvals(M)
        ev = ev[np.argsort(-np.abs(ev - M[1, 1]))]
        lam1, lam2 = float(np.real(ev[0])), float(np.real(ev[1]))
    return FloquetPair(float(lam1), float(lam2), orbit)


def integrate_with_tangent(
    params: ModelParams,
    config: IntegratorConfig,
    initial: TangentState,
    t_end: float,
    renorm_every: float | None = None,
) -> Iterator[Stretch]:
    """Evolve a tangent vector along the flow and yield its log-stretch per renormalization.

    The first column of ``initial.matrix`` is the tangent vector.  Jumps act on
    it through diag(1 - p, 1).  The phase of the forcing is ``initial.theta``
    at ``initial.base.t`` (or ``omega * t`` when theta is None).
    """
    renorm_every = params.T if renorm_every is None else renorm_every
    if renorm_every <= 0:
        raise DomainError("renorm_every must be > 0")
    base = initial.base
    t0 = float(base.t)
    if not t_end > t0:
        raise DomainError("t_end must exceed the initial time")
    phase0 = 0.0 if initial.theta is None else initial.theta - params.omega * t0
    flow = _Flow(params, config, phase0)
    pulses, t_end = _pulse_schedule(t0, t_end, params.T)
    n_renorm = int(math.floor((t_end - t0) / renorm_every + 1e-9))
    renorms = [t0 + k * renorm_every for k in range(1, n_renorm + 1)]
    events = sorted(set(pulses) | set(renorms) | {t_end})
    pulse_set = set(pulses)
    renorm_set = set(renorms) | {t_end}

    y = np.zeros(K.NVAR)
    y[:3] = base.S, base.I, base.R
    v = initial.matrix[:, 0]
    norm = math.hypot(v[0], v[1])
    reseed = norm == 0.0 or not math.isfinite(norm)
    if reseed:
        v, norm = np.array([1.0, 0.0]), 1.0
    y[4], y[6] = v[0] / norm, v[1] / norm
    t = t0
    for b in events:
        y, _ = flow.segment(y, t, b, tangent=True)
        if b in pulse_set:
            flow.jump(y, tangent=True)
        t = b
        if b in renorm_set:
            norm = math.hypot(y[4], y[6])
            if norm == 0.0 or not math.isfinite(norm):
                y[4], y[6] = 1.0, 0.0
                yield Stretch(t, 0.0, True)
                reseed = False
                continue
            y[4] /= norm
            y[6] /= norm
            yield Stretch(t, math.log(norm), reseed)
            reseed = False
