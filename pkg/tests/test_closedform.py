import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from pulsesir import DomainError, ExistenceError, ModelParams, RegimeLabel
from pulsesir import closedform as cf

# Reference values computed independently (scipy solve_ivp, quad, brentq).
LOGISTIC_A1_S02_T4 = 0.9317384593585716
X1_STAR_T4_P03 = 0.6944027918908677
INTEGRAL_T4_P03 = 3.6433250560612676
LAMBDA2_P03 = 1.6144471086176673
LAMBDA2_P08 = 0.5228325066449901
LAMBDA1_P08 = 0.0915781944436709
LAMBDA1_P03 = 0.0261651984124774
RP_T4_P03 = 1.1710687680196932
X1_STAR_P099 = -0.00847078676013635
P2_T4 = 0.5888877094928127
P1_T4 = 0.9816843611112658


def simpson(f, a, b, n=20000):
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def test_logistic_example():
    assert cf.logistic_between_pulses(1.0, 0.2, 4.0) == pytest.approx(LOGISTIC_A1_S02_T4, abs=1e-12)
    assert cf.logistic_between_pulses(1.0, 0.0, 4.0) == 0.0
    assert cf.logistic_between_pulses(0.7, 0.7, 4.0) == pytest.approx(0.7)
    with pytest.raises(DomainError):
        cf.logistic_between_pulses(1.0, 1.2, 1.0)


def test_logistic_against_ode():
    sol = integrate.solve_ivp(lambda t, s: s * (0.8 - s), (0, 3), [0.1], rtol=1e-12, atol=1e-14)
    assert cf.logistic_between_pulses(0.8, 0.1, 3.0) == pytest.approx(sol.y[0, -1], abs=1e-10)


def test_fixed_point_examples(base):
    m = base.with_(p=0.3)
    fp = cf.fixed_points_S(m)
    assert fp.x1_star == pytest.approx(X1_STAR_T4_P03, abs=1e-13)
    assert fp.physical
    assert cf.strobe_S(m, fp.x1_star) == pytest.approx(fp.x1_star, abs=1e-14)
    assert cf.strobe_S(m, 0.0) == 0.0
    fp = cf.fixed_points_S(base.with_(p=0.99))
    assert fp.x1_star == pytest.approx(X1_STAR_P099, abs=1e-13)
    assert not fp.physical


def test_threshold_examples(base):
    assert base.S_c == pytest.approx(0.7777777777777777, abs=1e-15)
    assert cf.p1(4.0, 1.0) == pytest.approx(P1_T4, abs=1e-14)
    assert cf.p2(4.0, 1.0, base.S_c) == pytest.approx(P2_T4, abs=1e-14)
    root = optimize.brentq(lambda p: cf.floquet_analytic(base.with_(p=p)).lambda2 - 1.0, 0.1, 0.9, xtol=1e-15)
    assert cf.p2(4.0, 1.0, base.S_c) == pytest.approx(root, abs=1e-12)
    assert cf.p1(1e-12, 1.0) == pytest.approx(1e-12)
    with pytest.raises(ExistenceError):
        cf.p2(4.0, 0.5, 0.6)


def test_vectorized_thresholds(base):
    T = np.array([1.0, 2.0, 4.0])
    np.testing.assert_allclose(cf.p1(T, 1.0), [cf.p1(t, 1.0) for t in T])
    np.testing.assert_allclose(cf.p2(T, 1.0, base.S_c), [cf.p2(t, 1.0, base.S_c) for t in T])
    p = np.array([0.1, 0.5])
    np.testing.assert_allclose(cf.T1(p, 1.0), [cf.T1(q, 1.0) for q in p])


@given(T=st.floats(1e-3, 50.0), A=st.floats(0.05, 1.0))
def test_p1_T1_inverse(T, A):
    # 1 - p1 loses digits once e^{-AT} nears machine epsilon
    assume(A * T < 12)
    assert cf.T1(cf.p1(T, A), A) == pytest.approx(T, rel=1e-9)


@given(T=st.floats(1e-3, 30.0), A=st.floats(0.2, 1.0), frac=st.floats(0.01, 0.99))
def test_p2_T2_inverse_and_ordering(T, A, frac):
    S_c = frac * A
    assume((A - S_c) * T < 12)
    q = cf.p2(T, A, S_c)
    assert cf.T2(q, A, S_c) == pytest.approx(T, rel=1e-9)
    assert q < cf.p1(T, A)


@given(T=st.floats(0.1, 10.0), A=st.floats(0.2, 1.0), frac=st.floats(0.05, 0.95))
def test_threshold_monotonicity(T, A, frac):
    S_c = frac * A
    h = 1e-3
    assert cf.p1(T + h, A) > cf.p1(T, A)
    assert cf.p2(T + h, A, S_c) > cf.p2(T, A, S_c)


@given(T=st.floats(0.2, 8.0), A=st.floats(0.2, 1.0), u=st.floats(0.01, 0.99))
@settings(max_examples=60)
def test_integral_identity_against_quad(T, A, u):
    p = u * cf.p1(T, A)
    m = ModelParams(A=A, beta0=1.0, sigma=0.1, g=0.1, T=T, p=p)
    q, _ = integrate.quad(lambda t: cf.disease_free_periodic_S(m, t), 0, T, epsabs=1e-13, epsrel=1e-13)
    assert q == pytest.approx(math.log1p(-p) + A * T, abs=1e-8)


def test_integral_example(base):
    assert cf.disease_free_integral(base.with_(p=0.3)) == pytest.approx(INTEGRAL_T4_P03, abs=1e-13)


def test_disease_free_profile(base):
    m = base.with_(p=0.3)
    x = cf.fixed_points_S(m).x1_star
    assert cf.disease_free_periodic_S(m, 0.0) == pytest.approx(x, abs=1e-14)
    pre = cf.disease_free_periodic_S(m, 4.0, since_pulse=True)
    assert (1 - m.p) * pre == pytest.approx(x, abs=1e-14)
    assert cf.disease_free_periodic_S(m, 9.0) == pytest.approx(cf.disease_free_periodic_S(m, 1.0))
    with pytest.raises(ExistenceError):
        cf.disease_free_periodic_S(base.with_(p=0.99), 0.0)


def test_floquet_examples(base):
    fl = cf.floquet_analytic(base.with_(p=0.3))
    assert fl.lambda1 == pytest.approx(LAMBDA1_P03, rel=1e-12)
    assert fl.lambda2 == pytest.approx(LAMBDA2_P03, rel=1e-12)
    assert not fl.stable
    fl = cf.floquet_analytic(base.with_(p=0.8))
    assert fl.lambda1 == pytest.approx(LAMBDA1_P08, rel=1e-12)
    assert fl.lambda2 == pytest.approx(LAMBDA2_P08, rel=1e-12)
    assert fl.stable
    origin = cf.floquet_analytic(base.with_(p=0.3), orbit="origin")
    assert origin.lambda1 == pytest.approx(0.7 * math.exp(4.0))
    with pytest.raises(DomainError):
        cf.floquet_analytic(base, orbit="torus")


@given(T=st.floats(0.2, 8.0), u=st.floats(0.01, 0.99), beta0=st.floats(0.5, 3.0))
def test_floquet_matches_threshold_and_Rp(T, u, beta0):
    m = ModelParams(A=1.0, beta0=beta0, sigma=0.2, g=0.5, T=T, p=u * cf.p1(T, 1.0))
    fl = cf.floquet_analytic(m)
    Rp = cf.reproduction_number_Rp(m)
    assert math.log(fl.lambda2) == pytest.approx(m.removal * T * (Rp - 1), abs=1e-9)
    if m.A > m.S_c:
        q = cf.p2(T, m.A, m.S_c)
        if abs(m.p - q) > 1e-9:
            assert (fl.lambda2 < 1) == (m.p > q)
    assert (fl.lambda1 < 1) == (m.p < cf.p1(T, 1.0))


def test_Rp_example(base):
    assert cf.reproduction_number_Rp(base.with_(p=0.3)) == pytest.approx(RP_T4_P03, abs=1e-13)
    assert cf.reproduction_number_Rp(base.with_(p=1.0)) == -math.inf


def test_seasonal_threshold_reduces_at_gamma_zero(base):
    m = base.with_(p=0.3)
    assert cf.p2_seasonal(m) == cf.p2(4.0, 1.0, m.S_c)


def test_seasonal_threshold_against_simpson():
    m = ModelParams(A=1.0, beta0=2.0, sigma=0.2, g=0.5, T=4.0, p=0.5, omega=6.0, gamma=0.5)
    f = lambda t: (1 + np.cos(m.omega * t)) * cf.disease_free_periodic_S(m, t, since_pulse=True)
    expect = -math.expm1(-((m.A - m.S_c) * m.T + m.gamma * simpson(f, 0, m.T)))
    assert cf.p2_seasonal(m) == pytest.approx(expect, abs=1e-10)


@given(gamma=st.floats(1e-3, 2.0), T=st.floats(0.5, 6.0))
@settings(max_examples=40)
def test_seasonal_threshold_exceeds_unforced(gamma, T):
    m = ModelParams(A=1.0, beta0=2.0, sigma=0.2, g=0.5, T=T, p=0.3 * cf.p1(T, 1.0), omega=6.0, gamma=gamma)
    assert cf.p2_seasonal(m) > cf.p2(T, 1.0, m.S_c)


def test_endemic_equilibrium(base):
    S, I = cf.endemic_equilibrium(base)
    assert S == pytest.approx(0.7777777777777777, abs=1e-15)
    assert I == pytest.approx(0.24691358024691365, abs=1e-15)
    with pytest.raises(ExistenceError):
        cf.endemic_equilibrium(base.with_(beta0=0.5))


@pytest.mark.parametrize(
    "p,label",
    [(1.0, RegimeLabel.FULL_COVERAGE), (0.99, RegimeLabel.TRIVIAL_DISEASE_FREE),
     (0.7, RegimeLabel.NONTRIVIAL_DISEASE_FREE), (0.3, RegimeLabel.ENDEMIC_PERIODIC),
     (0.0, RegimeLabel.ENDEMIC_EQUILIBRIUM)],
)
def test_classify_analytic_regions(base, p, label):
    assert cf.classify_analytic(base.with_(p=p)) is label


def test_classify_analytic_boundaries(base):
    assert cf.classify_analytic(base.with_(p=cf.p1(4.0, 1.0))) is RegimeLabel.SADDLE_NODE
    assert cf.classify_analytic(base.with_(p=cf.p2(4.0, 1.0, base.S_c))) is RegimeLabel.TRANSCRITICAL
    assert cf.classify_analytic(base.with_(beta0=0.5, p=0.2)) is RegimeLabel.NONTRIVIAL_DISEASE_FREE
    with pytest.raises(DomainError):
        cf.classify_analytic(base.with_(gamma=0.1))


def test_region_numbers():
    assert [lab.region for lab in (RegimeLabel.FULL_COVERAGE, RegimeLabel.TRIVIAL_DISEASE_FREE,
                                   RegimeLabel.NONTRIVIAL_DISEASE_FREE, RegimeLabel.ENDEMIC_PERIODIC,
                                   RegimeLabel.ENDEMIC_EQUILIBRIUM)] == [1, 2, 3, 4, 5]
