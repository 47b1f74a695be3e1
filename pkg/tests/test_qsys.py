import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from spinmod import qsys
from spinmod.trion import TUP, generator, op

from conftest import GAMMA, euler_oracle, random_density


def decay2(gamma=1.0):
    L = np.sqrt(gamma) * np.array([[0, 1], [0, 0]], complex)  # |g><e| with g=0, e=1
    return qsys.liouvillian(np.zeros((2, 2)), [L])


def test_vec_is_column_stacking():
    a = np.arange(4).reshape(2, 2)
    assert np.array_equal(qsys.vec(a), [0, 2, 1, 3])
    assert np.array_equal(qsys.unvec(qsys.vec(a)), a)


def test_sprepost_identity(rng):
    A, B, X = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(qsys.sprepost(A, B) @ qsys.vec(X), qsys.vec(A @ X @ B))


def test_zero_generator():
    L = qsys.liouvillian(np.zeros((3, 3)))
    assert L.action.shape == (9, 9)
    assert not np.any(L.action)


def test_rejects_non_hermitian_and_bad_dims():
    with pytest.raises(ValueError):
        qsys.liouvillian(np.array([[0, 1], [0, 0]], complex))
    with pytest.raises(qsys.DimensionError):
        qsys.liouvillian(np.zeros((2, 2)), [np.zeros((3, 3))])


def test_hermiticity_error_zero_for_hermitian(rng):
    assert qsys.hermiticity_error(random_density(rng)) < 1e-12


def test_exponential_decay():
    L = decay2(2.0)
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    for t in (0.1, 0.5, 1.3):
        assert abs(qsys.propagate(L, rho0, t)[1, 1] - np.exp(-2.0 * t)) < 1e-8


def test_propagate_identity_and_errors(rng):
    L = decay2()
    rho0 = random_density(rng, 2)
    out = qsys.propagate(L, rho0, 0.0)
    assert np.array_equal(out, rho0) and out is not rho0
    with pytest.raises(ValueError):
        qsys.propagate(L, rho0, -1.0)


def test_propagate_matches_matrix_exponential(p_qd1, rng):
    L = generator(p_qd1)
    rho0 = random_density(rng)
    t = 3.0
    ref = qsys.unvec(expm(L.action * t) @ qsys.vec(rho0))
    assert np.max(np.abs(qsys.propagate(L, rho0, t) - ref)) < 1e-9


@pytest.mark.parametrize("t_over_gamma", [1.0, 10.0])
def test_propagate_matches_euler_oracle(p_qd1, t_over_gamma):
    L = generator(p_qd1)
    rho0 = op(TUP, TUP).astype(complex)
    t = t_over_gamma / GAMMA
    ref = euler_oracle(L, rho0, t, 1e-4 / GAMMA)
    assert np.max(np.abs(qsys.propagate(L, rho0, t) - ref)) < 1e-6


def test_steady_state_dark_and_degenerate():
    rho = qsys.steady_state(decay2())
    assert np.allclose(rho, np.diag([1.0, 0.0]))
    with pytest.raises(qsys.SteadyStateError):
        qsys.steady_state(qsys.liouvillian(np.zeros((2, 2))))


def test_weak_drive_two_level_population():
    g, om = 1.0, 0.01
    H = 0.5 * om * np.array([[0, 1], [1, 0]], complex)
    L = qsys.liouvillian(H, [np.sqrt(g) * np.array([[0, 1], [0, 0]], complex)])
    pe = qsys.steady_state(L)[1, 1].real
    assert abs(pe / (om**2 / (g**2 + 2 * om**2)) - 1) < 1e-8
    assert abs(pe / (om**2 / g**2) - 1) < 0.05


def test_steady_state_matches_long_propagation(p_qd1, rng):
    L = generator(p_qd1)
    ss = qsys.steady_state(L)
    long = qsys.propagate(L, random_density(rng), 200 * 2.7)
    assert np.max(np.abs(ss - long)) < 1e-6
    assert qsys.is_density_matrix(ss)


@st.composite
def generators(draw):
    dim = draw(st.integers(2, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    r = np.random.default_rng(seed)
    h = r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim))
    ops = [r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim)) for _ in range(draw(st.integers(0, 3)))]
    return qsys.liouvillian(h + h.conj().T, ops), random_density(r, dim), draw(st.floats(0.01, 2.0))


@given(generators())
def test_propagation_preserves_density_matrices(case):
    L, rho0, t = case
    rho = qsys.propagate(L, rho0, t)
    assert abs(np.trace(rho) - 1) < 1e-9
    assert qsys.hermiticity_error(rho) < 1e-9
    assert np.linalg.eigvalsh(rho).min() > -1e-9


@given(generators())
def test_generator_is_trace_free(case):
    L, rho0, _ = case
    assert abs(np.trace(L(rho0))) < 1e-9 * max(1.0, L.rate_scale)
