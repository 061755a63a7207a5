"""Empirical omega-limit classification, parameter-plane sweeps and chaos indicators."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import closedform as cf
from .closedform import RegimeLabel
from .integrator import (
    POST_JUMP,
    IntegrationError,
    IntegratorConfig,
    TangentState,
    Trajectory,
    integrate,
    integrate_with_tangent,
    strobe_map,
)
from .model import DomainError, ExistenceError, ModelParams, State

__all__ = [
    "OmegaLimitReport",
    "SweepGrid",
    "SweepResult",
    "EndemicOrbit",
    "LyapunovResult",
    "ConvergenceError",
    "classify_empirical",
    "label_trajectory",
    "sweep_bifurcation_plane",
    "find_endemic_orbit",
    "lyapunov_max",
    "poincare_section",
    "permanence_check",
]

CHAOS_THRESHOLD = 0.02


class ConvergenceError(ArithmeticError):
    def __init__(self, message, best=None, residual=math.inf):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass
class OmegaLimitReport:
    label: RegimeLabel
    terminal_strobe: np.ndarray
    residuals: dict
    lyapunov: float | None = None

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "region": self.label.region,
            "terminal_strobe": self.terminal_strobe.tolist(),
            "residuals": self.residuals,
            "lyapunov": self.lyapunov,
        }


def _tail_blocks(traj: Trajectory, window: int):
    """Dense rows split into whole periods, last ``window`` of them."""
    post = np.flatnonzero(traj.impulse == POST_JUMP)
    if post.size < window + 1:
        return None
    starts = post[-window - 1 :]
    lengths = np.diff(starts)
    if np.any(lengths != lengths[0]):
        return None
    n = lengths[0]
    idx = starts[:-1, None] + np.arange(n)[None, :]
    return traj.t[idx], traj.S[idx], traj.I[idx]


def label_trajectory(traj: Trajectory, tol: float = 1e-6, window: int = 50, method: str = "strobe"):
    """Label the omega-limit suggested by the tail of ``traj``.

    Returns ``(label or None, residuals)``; ``None`` means the tail has not
    settled yet.  ``method="strobe"`` inspects post-pulse samples only,
    ``method="dense"`` inspects every stored sample of the final periods.
    """
    params = traj.params
    _, Ss, Is = traj.strobe()
    if Ss.size < window + 1:
        return None, {"pulses": int(Ss.size)}
    S_w, I_w = Ss[-window - 1 :], Is[-window - 1 :]
    fp = cf.fixed_points_S(params)
    if method == "strobe":
        dS, dI = np.abs(np.diff(S_w)), np.abs(np.diff(I_w))
        res = float(max(dS.max(), dI.max()))
        i_min = float(I_w.min())
        rel_I = float(dI.max() / i_min) if i_min > 0 else math.inf
        s_max, i_max = float(S_w.max()), float(I_w.max())
        dist_x1 = float(np.abs(S_w - fp.x1_star).max())
        scale = 1.0
    elif method == "dense":
        blocks = _tail_blocks(traj, window)
        if blocks is None:
            raise DomainError("dense labelling needs a period-aligned trajectory")
        tb, Sb, Ib = blocks
        # within one period the flow can amplify S-deviations by at most e^{AT}
        scale = math.exp(params.A * params.T)
        res = float(max(np.abs(np.diff(Sb, axis=0)).max(), np.abs(np.diff(Ib, axis=0)).max()))
        i_min = float(Ib.min())
        rel_I = float(np.abs(np.diff(Ib, axis=0)).max() / i_min) if i_min > 0 else math.inf
        s_max, i_max = float(Sb.max()), float(Ib.max())
        if fp.physical and params.p > 0:
            profile = cf.disease_free_periodic_S(params, tb - tb[:, :1], since_pulse=True)
            dist_x1 = float(np.abs(Sb - profile).max())
        else:
            dist_x1 = float(np.abs(Sb - max(fp.x1_star, 0.0)).max())
    else:
        raise DomainError(f"unknown method {method!r}")

    residuals = {
        "strobe_residual": res,
        "relative_I_residual": rel_I,
        "max_S": s_max,
        "max_I": i_max,
        "min_I": i_min,
        "distance_to_disease_free": dist_x1,
        "pulses": int(Ss.size),
    }
    lim = tol * scale
    if i_max < lim:
        if s_max < lim:
            return (RegimeLabel.FULL_COVERAGE if params.p == 1.0 else RegimeLabel.TRIVIAL_DISEASE_FREE), residuals
        if fp.physical and dist_x1 < lim:
            return RegimeLabel.NONTRIVIAL_DISEASE_FREE, residuals
    elif res <= lim and rel_I <= lim:
        if params.p == 0.0 and params.gamma == 0.0 and params.A > params.S_c:
            eq = cf.endemic_equilibrium(params)
            gap = max(abs(S_w[-1] - eq[0]), abs(I_w[-1] - eq[1]))
            residuals["distance_to_equilibrium"] = float(gap)
            if gap < math.sqrt(tol):
                return RegimeLabel.ENDEMIC_EQUILIBRIUM, residuals
        return RegimeLabel.ENDEMIC_PERIODIC, residuals
    return None, residuals


def classify_empirical(
    params: ModelParams,
    config: IntegratorConfig | None = None,
    initial=(0.5, 0.4),
    horizon: float | None = None,
    tol: float = 1e-6,
    *,
    window: int = 50,
    max_horizon: float | None = None,
    method: str = "strobe",
    compute_lyapunov: bool = True,
) -> OmegaLimitReport:
    """Integrate until the stroboscopic tail settles and name its omega-limit.

    The horizon is doubled (up to ``max_horizon``) while the tail is still
    moving.  Non-settling runs are tagged chaotic only when the largest
    Lyapunov exponent exceeds ``CHAOS_THRESHOLD``.
    """
    config = config or IntegratorConfig(dense_output_dt=params.T if method == "strobe" else 0.05)
    horizon = window * params.T if horizon is None else horizon
    if horizon < 50 * params.T * (1 - 1e-12):
        raise DomainError("horizon must cover at least 50 pulse periods")
    if not 0 < tol <= 1e-2:
        raise DomainError("tol must lie in (0, 1e-2]")
    max_horizon = max(horizon, min(2000 * params.T, 5000.0)) if max_horizon is None else max(horizon, max_horizon)
    S0, I0 = initial[0], initial[1]
    state = State(S0, I0, 0.0, 0.0)
    traj = integrate(params, config, state, horizon)
    while True:
        label, residuals = label_trajectory(traj, tol, window, method)
        t_now = float(traj.t[-1])
        if label is not None or t_now >= max_horizon * (1 - 1e-12):
            break
        extra = min(t_now, max_horizon - t_now)
        more = integrate(params, config, traj.final, t_now + extra)
        traj = _concat(traj, more)
    residuals["horizon"] = float(traj.t[-1])
    _, Ss, Is = traj.strobe()
    k = min(window, Ss.size)
    terminal = np.column_stack([Ss[-k:], Is[-k:]])
    le = None
    if label is None:
        label = RegimeLabel.UNDETERMINED
        if compute_lyapunov:
            final = traj.final
            le_horizon = max(500 * params.T, 2000.0)
            le = lyapunov_max(params, config, final, final.t + le_horizon, transient=0.2).exponent
            if le > CHAOS_THRESHOLD:
                label = RegimeLabel.CHAOTIC
    return OmegaLimitReport(label, terminal, residuals, le)


def _concat(a: Trajectory, b: Trajectory) -> Trajectory:
    # b starts with a copy of a's last row
    return Trajectory(
        t=np.concatenate([a.t, b.t[1:]]),
        S=np.concatenate([a.S, b.S[1:]]),
        I=np.concatenate([a.I, b.I[1:]]),
        R=np.concatenate([a.R, b.R[1:]]),
        impulse=np.concatenate([a.impulse, b.impulse[1:]]),
        params=a.params,
        n_steps=a.n_steps + b.n_steps,
        n_clamps=a.n_clamps + b.n_clamps,
    )


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepGrid:
    T_values: tuple
    p_values: tuple
    horizon_periods: float = 50.0
    tol: float = 1e-6
    initial: tuple = (0.5, 0.4)
    boundary_band: float = 0.02
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11

    def __post_init__(self):
        for name in ("T_values", "p_values"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim != 1 or v.size == 0:
                raise DomainError(f"{name} must be a nonempty 1-d sequence")
            if np.any(np.diff(v) <= 0):
                raise DomainError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, tuple(float(x) for x in v))
        if min(self.T_values) <= 0:
            raise DomainError("T values must be > 0")
        if min(self.p_values) < 0 or max(self.p_values) > 1:
            raise DomainError("p values must lie in [0, 1]")

    @classmethod
    def linspace(cls, T_range, p_range, n_T, n_p, **kw) -> "SweepGrid":
        return cls(tuple(np.linspace(*T_range, n_T)), tuple(np.linspace(*p_range, n_p)), **kw)


@dataclass
class SweepResult:
    grid: SweepGrid
    base: ModelParams
    analytic: np.ndarray
    empirical: np.ndarray
    lyapunov: np.ndarray
    residual: np.ndarray
    errors: dict = field(default_factory=dict)
    overlay: dict = field(default_factory=dict)

    def near_boundary(self) -> np.ndarray:
        T = np.asarray(self.grid.T_values)[:, None]
        p = np.asarray(self.grid.p_values)[None, :]
        params = self.base
        band = self.grid.boundary_band
        near = np.abs(p - cf.p1(T, params.A)) < band
        if params.A > params.S_c:
            near |= np.abs(p - cf.p2(T, params.A, params.S_c)) < band
        return near

    def discrepancies(self) -> list[dict]:
        out = []
        near = self.near_boundary()
        for i, T in enumerate(self.grid.T_values):
            for j, p in enumerate(self.grid.p_values):
                if self.analytic[i, j] != self.empirical[i, j]:
                    out.append(
                        {
                            "T": T,
                            "p": p,
                            "label_analytic": self.analytic[i, j],
                            "label_empirical": self.empirical[i, j],
                            "near_boundary": bool(near[i, j]),
                            "error": self.errors.get((i, j)),
                        }
                    )
        return out

    def agreement(self) -> float:
        """Fraction of cells outside the boundary band where both labels agree."""
        mask = ~self.near_boundary()
        if not mask.any():
            return math.nan
        return float(np.mean(self.analytic[mask] == self.empirical[mask]))

    def rows(self):
        for i, T in enumerate(self.grid.T_values):
            for j, p in enumerate(self.grid.p_values):
                yield T, p, self.analytic[i, j], self.empirical[i, j], self.lyapunov[i, j], self.residual[i, j]


def _sweep_cell(args):
    params, grid, i, j = args
    T, p = grid.T_values[i], grid.p_values[j]
    cell = params.with_(T=T, p=p)
    config = IntegratorConfig(rel_tol=grid.rel_tol, abs_tol=grid.abs_tol, dense_output_dt=T)
    try:
        rep = classify_empirical(cell, config, grid.initial, grid.horizon_periods * T, grid.tol)
    except (IntegrationError, ArithmeticError, ValueError) as exc:
        return i, j, RegimeLabel.UNDETERMINED.value, math.nan, math.nan, f"{type(exc).__name__}: {exc}"
    le = math.nan if rep.lyapunov is None else rep.lyapunov
    return i, j, rep.label.value, le, rep.residuals.get("strobe_residual", math.nan), None


def sweep_bifurcation_plane(params_base: ModelParams, grid: SweepGrid, jobs: int = 1) -> SweepResult:
    """Classify every (T, p) cell empirically and compare with the analytic regions."""
    if params_base.gamma != 0.0:
        raise DomainError("the analytic overlay needs gamma == 0")
    nT, np_ = len(grid.T_values), len(grid.p_values)
    analytic = np.empty((nT, np_), dtype=object)
    for i, T in enumerate(grid.T_values):
        for j, p in enumerate(grid.p_values):
            analytic[i, j] = cf.classify_analytic(params_base.with_(T=T, p=p)).value
    empirical = np.empty((nT, np_), dtype=object)
    lyap = np.full((nT, np_), math.nan)
    resid = np.full((nT, np_), math.nan)
    errors = {}
    tasks = [(params_base, grid, i, j) for i in range(nT) for j in range(np_)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_sweep_cell(t) for t in tasks]
    for i, j, label, le, res, err in results:
        empirical[i, j] = label
        lyap[i, j] = le
        resid[i, j] = res
        if err:
            errors[(i, j)] = err
    T_arr = np.asarray(grid.T_values)
    overlay = {"T": T_arr.tolist(), "p1": cf.p1(T_arr, params_base.A).tolist()}
    if params_base.A > params_base.S_c:
        overlay["p2"] = cf.p2(T_arr, params_base.A, params_base.S_c).tolist()
    return SweepResult(grid, params_base, analytic, empirical, lyap, resid, errors, overlay)


# ---------------------------------------------------------------- endemic orbit


@dataclass
class EndemicOrbit:
    S_star: float
    I_star: float
    mean_S: float
    residual: float
    iterations: int
    orbit: Trajectory


def _broyden(F, x, J, tol, max_iter):
    fx = F(x)
    for it in range(max_iter):
        if np.max(np.abs(fx)) <= tol:
            return x, fx, it
        dx = -np.linalg.solve(J, fx)
        x_new = x + dx
        if np.any(x_new <= 0):
            x_new = x + 0.5 * dx
            dx = x_new - x
        f_new = F(x_new)
        df = f_new - fx
        J = J + np.outer(df - J @ dx, dx) / (dx @ dx)
        x, fx = x_new, f_new
    return x, fx, max_iter


def find_endemic_orbit(
    params: ModelParams,
    config: IntegratorConfig | None = None,
    *,
    p_step: float = 0.05,
    tol: float = 1e-9,
    max_iter: int = 60,
    damping: float = 0.5,
    damped_steps: int = 5,
) -> EndemicOrbit:
    """Locate the period-T endemic orbit as a fixed point of the stroboscopic map.

    Continuation in p starts from the endemic equilibrium at p = 0.  At each
    step a few damped fixed-point sweeps precede Broyden updates seeded with
    the variational Jacobian.
    """
    config = config or IntegratorConfig()
    if params.gamma != 0.0:
        raise DomainError("endemic orbit search needs gamma == 0")
    if params.A <= params.S_c:
        raise ExistenceError("no endemic orbit when R0 <= 1")
    if params.p >= cf.p2(params.T, params.A, params.S_c):
        raise ExistenceError(f"p={params.p} >= p2(T): no endemic periodic orbit")
    x = np.array(cf.endemic_equilibrium(params))
    n = max(1, math.ceil(params.p / p_step))
    total_iter = 0
    for k in range(1, n + 1):
        step = params.with_(p=params.p * k / n)

        def F(z, step=step):
            return strobe_map(step, config, z)[0] - z

        for _ in range(damped_steps):
            x = x + damping * F(x)
        _, _, Jphi = strobe_map(step, config, x, jacobian=True)
        x, fx, it = _broyden(F, x, Jphi - np.eye(2), tol, max_iter)
        total_iter += it
    residual = float(np.max(np.abs(fx)))
    if residual > tol:
        raise ConvergenceError(f"endemic orbit not converged (residual {residual:.3e})", best=x, residual=residual)
    _, integral_S = strobe_map(params, config, x)
    orbit = integrate(params, config, State(x[0], x[1], 0.0, 0.0), params.T)
    return EndemicOrbit(float(x[0]), float(x[1]), float(integral_S / params.T), residual, total_iter, orbit)


# ---------------------------------------------------------------- Lyapunov


@dataclass
class LyapunovResult:
    exponent: float
    times: np.ndarray
    running: np.ndarray
    reseeds: int = 0


def lyapunov_max(
    params: ModelParams,
    config: IntegratorConfig | None,
    initial,
    horizon: float,
    renorm_every: float | None = None,
    transient: float = 0.2,
) -> LyapunovResult:
    """Largest Lyapunov exponent of the (S, I) flow by tangent renormalization.

    ``initial`` is a State or (S, I, theta).  Stretches recorded in the first
    ``transient`` fraction of the run are discarded.
    """
    config = config or IntegratorConfig()
    if isinstance(initial, State):
        base, theta = initial, None
    else:
        base, theta = State(initial[0], initial[1], 0.0, 0.0), float(initial[2])
    span = horizon - base.t
    if span < 500 * params.T * (1 - 1e-12):
        raise DomainError("Lyapunov horizon must cover at least 500 pulse periods")
    if not 0 <= transient < 1:
        raise DomainError("transient fraction must lie in [0, 1)")
    t_cut = base.t + transient * span
    v0 = np.array([[1.0, 0.0], [1.0, 0.0]]) / math.sqrt(2.0)
    times, logs, reseeds = [], [], 0
    t_prev = t_cut
    for st in integrate_with_tangent(params, config, TangentState(base, v0, theta), horizon, renorm_every):
        reseeds += st.reseeded
        if st.t <= t_cut + 1e-12:
            t_prev = st.t
            continue
        times.append(st.t)
        logs.append(st.log_growth)
    if not times:
        raise DomainError("horizon too short for the renormalization interval")
    times = np.asarray(times)
    running = np.cumsum(logs) / (times - t_prev)
    return LyapunovResult(float(running[-1]), times, running, reseeds)


# ---------------------------------------------------------------- sections and bounds


def poincare_section(traj: Trajectory, theta_star: float) -> np.ndarray:
    """(S, I) points where the phase crosses ``theta_star`` going forward.

    Crossings are linearly interpolated between consecutive samples; the
    zero-length interval between the two rows of a pulse is never used.
    """
    if traj.theta is None:
        raise DomainError("trajectory has no phase coordinate; use integrate_suspended")
    if not 0.0 <= theta_star < 2 * math.pi:
        raise DomainError("theta_star must lie in [0, 2 pi)")
    omega = traj.params.omega
    t, th = traj.t, traj.theta
    dt = np.diff(t)
    keep = dt > 0
    # phase distance still to travel from sample k to the section
    ahead = np.mod(theta_star - th[:-1], 2 * math.pi)
    advance = omega * dt
    hit = keep & (ahead > 0) & (ahead <= advance)
    k = np.flatnonzero(hit)
    w = ahead[k] / advance[k]
    S = traj.S[k] + w * (traj.S[k + 1] - traj.S[k])
    I = traj.I[k] + w * (traj.I[k + 1] - traj.I[k])
    return np.column_stack([S, I])


def permanence_check(traj: Trajectory, tail_fraction: float = 0.5) -> tuple[float, float]:
    """Minimum S and minimum I over the final ``tail_fraction`` of the run."""
    if not 0 < tail_fraction <= 1:
        raise DomainError("tail_fraction must lie in (0, 1]")
    t0, t1 = traj.t[0], traj.t[-1]
    mask = traj.t >= t1 - tail_fraction * (t1 - t0)
    pulses = int(np.count_nonzero(traj.impulse[mask] == POST_JUMP))
    if pulses < 100:
        warnings.warn(f"tail holds only {pulses} pulses (< 100)", RuntimeWarning, stacklevel=2)
    return float(traj.S[mask].min()), float(traj.I[mask].min())
