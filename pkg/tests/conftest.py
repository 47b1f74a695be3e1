import numpy as np
import pytest
from hypothesis import settings

from spinmod.presets import qd1, qd1_tuned, qd2, trion_params

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

GAMMA = 1 / 0.46


@pytest.fixture(scope="session")
def p_qd1():
    return trion_params(qd1())


@pytest.fixture(scope="session")
def p_qd2():
    return trion_params(qd2())


@pytest.fixture(scope="session")
def p_tuned():
    return trion_params(qd1_tuned())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(rng, dim=4):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def euler_oracle(L, rho0, t, dt):
    """Brute-force first-order Euler steps of dρ/dt = L ρ, Richardson-extrapolated."""
    def run(h):
        n = int(round(t / h))
        v = rho0.reshape(-1, order="F").astype(complex)
        A = L.action
        for _ in range(n):
            v = v + h * (A @ v)
        return v

    return (2 * run(dt / 2) - run(dt)).reshape(rho0.shape, order="F")


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
