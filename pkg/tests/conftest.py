import numpy as np
import pytest

from pulsesir import IntegratorConfig, ModelParams


@pytest.fixture
def rates():
    """Rates of the unforced reference set (A=1, beta0=0.9, sigma=0.2, g=0.5)."""
    return dict(A=1.0, beta0=0.9, sigma=0.2, g=0.5)


@pytest.fixture
def base(rates):
    return ModelParams(T=4.0, **rates)


@pytest.fixture
def seasonal():
    """Seasonally forced reference set (beta0=2, omega=6, T=4, p=0.4)."""
    return ModelParams(A=1.0, beta0=2.0, sigma=0.2, g=0.5, p=0.4, T=4.0, omega=6.0, gamma=0.5)


@pytest.fixture
def config():
    return IntegratorConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def random_params(rng, region: int) -> ModelParams:
    """Draw (A, beta0, sigma, g, T, p) with R0 > 1 inside region 3 or 4."""
    from pulsesir import closedform as cf

    while True:
        A = rng.uniform(0.5, 1.0)
        beta0 = rng.uniform(0.8, 3.0)
        sigma = rng.uniform(0.05, 0.4)
        g = rng.uniform(0.05, 0.5)
        T = rng.uniform(0.5, 6.0)
        S_c = (sigma + g) / beta0
        if A <= S_c * 1.05:
            continue
        lo_p, hi_p = cf.p2(T, A, S_c), cf.p1(T, A)
        if region == 3:
            if hi_p - lo_p < 0.05:
                continue
            p = rng.uniform(lo_p + 0.01, hi_p - 0.01)
        else:
            if lo_p < 0.05:
                continue
            p = rng.uniform(0.0, lo_p - 0.01)
        return ModelParams(A=A, beta0=beta0, sigma=sigma, g=g, T=T, p=p)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
