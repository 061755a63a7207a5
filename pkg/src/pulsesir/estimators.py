"""scikit-learn compatible wrappers.

``RegimeClassifier`` predicts the regime label of (T, p) rows,
``StroboscopicSampler`` maps initial conditions to their post-pulse state
after a number of periods, and ``LyapunovEstimator`` predicts the largest
Lyapunov exponent for (S0, I0, theta0) rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import closedform as cf
from .analysis import SweepGrid, classify_empirical, lyapunov_max
from .closedform import RegimeLabel
from .integrator import IntegratorConfig, strobe_map
from .model import ModelParams


class _ModelMixin:
    def _params(self, **override) -> ModelParams:
        kw = dict(
            A=self.A, beta0=self.beta0, sigma=self.sigma, g=self.g,
            gamma=self.gamma, omega=self.omega,
        )
        for name in ("p", "T"):
            if hasattr(self, name):
                kw[name] = getattr(self, name)
        kw.update(override)
        return ModelParams(**kw)


class RegimeClassifier(_ModelMixin, ClassifierMixin, BaseEstimator):
    """Label (T, p) pairs with their asymptotic regime.

    ``method="analytic"`` uses the threshold curves (unforced model only);
    ``method="empirical"`` integrates from ``initial`` and inspects the tail.
    Fitting only validates the rates; there is nothing to learn.
    """

    def __init__(self, A=1.0, beta0=0.9, sigma=0.2, g=0.5, gamma=0.0, omega=1.0,
                 method="analytic", tol=1e-6, horizon_periods=50.0, initial=(0.5, 0.4)):
        self.A = A
        self.beta0 = beta0
        self.sigma = sigma
        self.g = g
        self.gamma = gamma
        self.omega = omega
        self.method = method
        self.tol = tol
        self.horizon_periods = horizon_periods
        self.initial = initial

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns (T, p)")
        if self.method not in ("analytic", "empirical"):
            raise ValueError(f"unknown method {self.method!r}")
        self.base_params_ = self._params(T=1.0, p=0.0)
        self.classes_ = np.array([lab.value for lab in RegimeLabel])
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "base_params_")
        X = check_array(X, dtype=float)
        out = []
        for T, p in X:
            params = self.base_params_.with_(T=T, p=p)
            if self.method == "analytic":
                label = cf.classify_analytic(params)
            else:
                label = classify_empirical(
                    params, IntegratorConfig(dense_output_dt=T), self.initial,
                    self.horizon_periods * T, self.tol,
                ).label
            out.append(label.value)
        return np.array(out, dtype=object)

    def grid(self, T_values, p_values) -> SweepGrid:
        return SweepGrid(tuple(T_values), tuple(p_values), horizon_periods=self.horizon_periods,
                         tol=self.tol, initial=tuple(self.initial))


class StroboscopicSampler(_ModelMixin, TransformerMixin, BaseEstimator):
    """Transform initial (S0, I0) rows into the post-pulse state after ``n_pulses``."""

    def __init__(self, A=1.0, beta0=0.9, sigma=0.2, g=0.5, p=0.0, T=4.0, gamma=0.0, omega=1.0,
                 n_pulses=50, rel_tol=1e-9, abs_tol=1e-11):
        self.A = A
        self.beta0 = beta0
        self.sigma = sigma
        self.g = g
        self.p = p
        self.T = T
        self.gamma = gamma
        self.omega = omega
        self.n_pulses = n_pulses
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol

    def fit(self, X=None, y=None):
        if X is not None:
            X = check_array(X, dtype=float)
            self.n_features_in_ = X.shape[1]
        self.params_ = self._params()
        self.config_ = IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 2 or np.any(X < 0):
            raise ValueError("X must hold nonnegative (S0, I0) rows")
        out = np.empty_like(X)
        T = self.params_.T
        for row, x in enumerate(X):
            for n in range(int(self.n_pulses)):
                x, _ = strobe_map(self.params_, self.config_, x, t0=n * T)
            out[row] = x
        return out


class LyapunovEstimator(_ModelMixin, BaseEstimator):
    """Largest Lyapunov exponent for each (S0, I0, theta0) row."""

    def __init__(self, A=1.0, beta0=2.0, sigma=0.2, g=0.5, p=0.4, T=4.0, gamma=0.5, omega=6.0,
                 horizon=2000.0, transient=0.2, rel_tol=1e-9, abs_tol=1e-11):
        self.A = A
        self.beta0 = beta0
        self.sigma = sigma
        self.g = g
        self.p = p
        self.T = T
        self.gamma = gamma
        self.omega = omega
        self.horizon = horizon
        self.transient = transient
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol

    def fit(self, X, y=None):
        self.params_ = self._params()
        self.config_ = IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol)
        self.exponents_ = self.predict(X)
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=float)
        if X.shape[1] == 2:
            X = np.column_stack([X, np.zeros(len(X))])
        return np.array([
            lyapunov_max(self.params_, self.config_, tuple(row), self.horizon, transient=self.transient).exponent
            for row in X
        ])

