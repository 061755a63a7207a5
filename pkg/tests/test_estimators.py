import numpy as np
import pytest
from sklearn.base import clone

from pulsesir import closedform as cf
from pulsesir.estimators import LyapunovEstimator, RegimeClassifier, StroboscopicSampler

GRID = np.array([[4.0, 1.0], [4.0, 0.99], [4.0, 0.7], [4.0, 0.3], [4.0, 0.0], [1.0, 0.5]])


def test_params_round_trip():
    clf = RegimeClassifier(beta0=1.2, method="empirical")
    assert clf.get_params()["beta0"] == 1.2
    other = clone(clf).set_params(beta0=0.8)
    assert other.beta0 == 0.8 and clf.beta0 == 1.2


def test_classifier_analytic_labels():
    clf = RegimeClassifier().fit(GRID)
    pred = clf.predict(GRID)
    assert list(pred[:5]) == ["full_coverage", "trivial_disease_free", "nontrivial_disease_free",
                              "endemic_periodic", "endemic_equilibrium"]
    assert set(pred) <= set(clf.classes_)


def test_classifier_empirical_matches_analytic():
    a = RegimeClassifier().fit(GRID).predict(GRID)
    e = RegimeClassifier(method="empirical").fit(GRID).predict(GRID)
    np.testing.assert_array_equal(a, e)
    assert RegimeClassifier().fit(GRID).score(GRID, a) == 1.0


def test_classifier_validation():
    with pytest.raises(ValueError):
        RegimeClassifier().fit(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        RegimeClassifier(method="guess").fit(GRID)
    grid = RegimeClassifier().grid([1.0, 2.0], [0.1, 0.2])
    assert grid.T_values == (1.0, 2.0)


def test_sampler_reaches_disease_free_orbit():
    X = np.array([[0.5, 0.4], [0.9, 0.01]])
    out = StroboscopicSampler(p=0.7, n_pulses=100).fit(X).transform(X)
    x1 = cf.fixed_points_S(StroboscopicSampler(p=0.7)._params()).x1_star
    np.testing.assert_allclose(out[:, 0], x1, atol=1e-6)
    assert np.all(out[:, 1] < 1e-6)
    with pytest.raises(ValueError):
        StroboscopicSampler().fit().transform(np.array([[-0.1, 0.2]]))


def test_lyapunov_estimator_sign():
    est = LyapunovEstimator(horizon=2000.0).fit(np.array([[0.4074, 0.2645, 0.0]]))
    assert est.exponents_.shape == (1,)
    assert est.exponents_[0] <= 0
    chaotic = LyapunovEstimator(omega=1.0, gamma=4.89, horizon=4000.0).fit(np.array([[0.4074, 0.2645]]))
    assert chaotic.exponents_[0] > 0.05
