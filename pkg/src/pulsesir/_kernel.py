"""Compiled Dormand-Prince 5(4) segment integrator.

The extended state vector has a fixed layout:

    0 S, 1 I, 2 R, 3 Q (running integral of S), 4..7 Phi (row-major 2x2)

Phi solves the variational equation Phi' = J(S, I, t) Phi in the (S, I)
coordinates; it is only integrated (and error-controlled) when ``tangent`` is
set.  Seasonal forcing is evaluated at phase ``omega * t + theta0``.
"""

import numpy as np
from numba import njit

NVAR = 8
NBASE = 4

# par layout
P_A, P_BETA0, P_REMOVAL, P_G, P_MU, P_GAMMA, P_OMEGA, P_THETA0, P_PSI_KIND, P_PSI_TAU = range(10)
NPAR = 10

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# dense output polynomial coefficients (Shampine's continuous extension)
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

TWO_PI = 2.0 * np.pi


@njit(cache=True)
def psi_eval(u, kind, tau, knots, values):
    if kind == 0:
        return 1.0 + np.cos(u)
    x = u - tau * np.floor(u / tau)
    return np.interp(x, knots, values)


@njit(cache=True)
def rhs(t, y, out, par, knots, values, tangent):
    S = y[0]
    I = y[1]
    gamma = par[P_GAMMA]
    beta = par[P_BETA0]
    if gamma != 0.0:
        beta = beta * (1.0 + gamma * psi_eval(par[P_OMEGA] * t + par[P_THETA0], int(par[P_PSI_KIND]), par[P_PSI_TAU], knots, values))
    bis = beta * I * S
    out[0] = S * (par[P_A] - S) - bis
    out[1] = bis - par[P_REMOVAL] * I
    out[2] = par[P_G] * I - par[P_MU] * y[2]
    out[3] = S
    if tangent:
        j00 = par[P_A] - 2.0 * S - beta * I
        j01 = -beta * S
        j10 = beta * I
        j11 = beta * S - par[P_REMOVAL]
        out[4] = j00 * y[4] + j01 * y[6]
        out[5] = j00 * y[5] + j01 * y[7]
        out[6] = j10 * y[4] + j11 * y[6]
        out[7] = j10 * y[5] + j11 * y[7]
    else:
        for k in range(4, NVAR):
            out[k] = 0.0


@njit(cache=True)
def integrate_segment(t0, t1, y0, h0, par, knots, values, tangent, rtol, atol, max_step, sample_t, samples):
    """Integrate from t0 to t1 (either direction), landing exactly on t1.

    ``sample_t`` holds times strictly between t0 and t1, ordered in the
    direction of integration; dense-output values are written to ``samples``.
    Returns (y1, last_step, status, n_steps, n_clamps).
    """
    n = NVAR if tangent else NBASE
    y = y0.copy()
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    K = np.zeros((7, NVAR))
    ytmp = np.zeros(NVAR)
    ynew = np.zeros(NVAR)
    t = t0
    n_steps = 0
    n_clamps = 0
    isample = 0
    nsample = sample_t.shape[0]
    if span == 0.0:
        return y, h0, STATUS_OK, 0, 0
    h = min(abs(h0), max_step, span)
    if h <= 0.0:
        h = min(max_step, span, 1e-3)
    rhs(t, y, K[0], par, knots, values, tangent)
    while True:
        remaining = abs(t1 - t)
        if remaining == 0.0:
            break
        last = False
        h_free = h
        if h >= remaining:
            h = remaining
            last = True
        hs = direction * h
        for s in range(1, 6):
            for k in range(n):
                acc = 0.0
                for j in range(s):
                    acc += _A[s, j] * K[j, k]
                ytmp[k] = y[k] + hs * acc
            rhs(t + _C[s] * hs, ytmp, K[s], par, knots, values, tangent)
        for k in range(n):
            acc = 0.0
            for j in range(6):
                acc += _B[j] * K[j, k]
            ynew[k] = y[k] + hs * acc
        t_new = t1 if last else t + hs
        rhs(t_new, ynew, K[6], par, knots, values, tangent)
        err = 0.0
        finite = True
        for k in range(n):
            e = 0.0
            for j in range(7):
                e += _E[j] * K[j, k]
            e *= hs
            sc = atol[k] + rtol * max(abs(y[k]), abs(ynew[k]))
            err += (e / sc) ** 2
            if not np.isfinite(ynew[k]):
                finite = False
        err = np.sqrt(err / n)
        if not finite or not np.isfinite(err):
            if h < 1e-14 * max(1.0, abs(t)):
                return y, h, STATUS_NONFINITE, n_steps, n_clamps
            h *= 0.2
            continue
        if err <= 1.0:
            # dense output for samples inside (t, t_new]
            while isample < nsample and (sample_t[isample] - t) * direction > 0.0 and (sample_t[isample] - t_new) * direction <= 0.0:
                theta = (sample_t[isample] - t) / hs
                q1 = theta
                q2 = theta * theta
                q3 = q2 * theta
                q4 = q3 * theta
                for k in range(n):
                    acc = 0.0
                    for j in range(7):
                        acc += K[j, k] * (_P[j, 0] * q1 + _P[j, 1] * q2 + _P[j, 2] * q3 + _P[j, 3] * q4)
                    samples[isample, k] = y[k] + hs * acc
                for k in range(n, NVAR):
                    samples[isample, k] = y[k]
                isample += 1
            t = t_new
            for k in range(n):
                y[k] = ynew[k]
            n_steps += 1
            clamped = False
            if y[0] < 0.0:
                y[0] = 0.0
                clamped = True
            if y[1] < 0.0:
                y[1] = 0.0
                clamped = True
            if clamped:
                n_clamps += 1
                rhs(t, y, K[0], par, knots, values, tangent)
            else:
                for k in range(NVAR):
                    K[0, k] = K[6, k]
            if last:
                h = max(h, h_free)
                break
            factor = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
            h = min(h * factor, max_step)
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14 * max(1.0, abs(t)):
                return y, h, STATUS_UNDERFLOW, n_steps, n_clamps
    return y, h, STATUS_OK, n_steps, n_clamps
