import numpy as np
import pytest
from scipy import stats

from spinmod import qsys
from spinmod import trajectories as tr
from spinmod.dynamics import HomodyneConfig, steady_state
from spinmod.ensemble import DetectorModel
from spinmod.trion import TUP, UP, TrionParams, MarkovianSpin, build_hamiltonian, generator, ket, v_port_field_op

from conftest import GAMMA


def small(seed=0, **kw):
    return tr.TrajectoryConfig(n_trajectories=96, duration=50.0, seed=seed, block_size=16, **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        tr.TrajectoryConfig(0, 1.0)
    with pytest.raises(ValueError):
        tr.TrajectoryConfig(1, 1.0, detection="homodyne")
    with pytest.raises(ValueError):
        tr.TrajectoryConfig(1, 1.0, seed=-1)
    assert tr.TrajectoryConfig(33, 1.0, block_size=16).n_blocks == 3


def test_deterministic_across_thread_counts(p_qd1, monkeypatch):
    streams = []
    for n in ("1", "3"):
        monkeypatch.setenv(tr.THREADS_ENV, n)
        streams.append(tr.simulate_stream(p_qd1, small(seed=11), DetectorModel(jitter_sigma=0.064)))
    assert streams[0] == streams[1]
    assert streams[0].channel_a.size > 0


def test_seeds_give_different_streams(p_qd1):
    a = tr.simulate_stream(p_qd1, small(seed=1))
    b = tr.simulate_stream(p_qd1, small(seed=2))
    assert not np.array_equal(a.channel_a, b.channel_a)
    assert a.duration_ps == b.duration_ps == 96 * 50_000


def test_dt_too_coarse(p_qd1):
    with pytest.raises(ValueError, match="too coarse"):
        tr.simulate_stream(p_qd1, tr.TrajectoryConfig(1, 10.0, dt=1.0))


def test_unraveling_reproduces_liouvillian(p_qd1):
    ops = [v_port_field_op(p_qd1)] + tr.unobserved_ops(p_qd1)
    L = qsys.liouvillian(build_hamiltonian(p_qd1), ops)
    assert np.allclose(L.action, generator(p_qd1).action, atol=1e-12)


def test_lo_only_is_poisson():
    p = TrionParams(gamma=GAMMA, omega_b=1.0, omega_h=1.0, omega_rabi=0.0, spin_dephasing=MarkovianSpin(0.3))
    h = HomodyneConfig(alpha=1.0)
    cfg = tr.TrajectoryConfig(64, 200.0, seed=5, detection="homodyne", homodyne=h, block_size=32)
    s = tr.simulate_stream(p, cfg)
    rate = 0.5  # α²/2 per port
    for t in (s.channel_a, s.channel_b):
        assert abs(t.size / s.duration - rate) < 5 * np.sqrt(rate / s.duration)
        gaps = np.diff(t) / 1000
        assert stats.kstest(gaps[gaps > 0], "expon", args=(0, 1 / rate)).pvalue > 1e-3


def test_click_rate_matches_steady_state(p_qd1):
    cfg = tr.TrajectoryConfig(512, 200.0, seed=3, block_size=128)
    s = tr.simulate_stream(p_qd1, cfg)
    expect = tr.expected_channel_rate(p_qd1, cfg) * s.duration
    for n in (s.channel_a.size, s.channel_b.size):
        # spin blockade bunches clicks, so allow a wide Poisson band
        assert abs(n - expect) < 6 * np.sqrt(expect)


def test_efficiency_thinning(p_qd1):
    cfg = tr.TrajectoryConfig(512, 200.0, seed=3, block_size=128)
    full = tr.simulate_stream(p_qd1, cfg)
    half = tr.simulate_stream(p_qd1, cfg, DetectorModel(efficiency=0.5))
    assert np.all(np.isin(half.channel_a, full.channel_a))
    ratio = half.channel_a.size / full.channel_a.size
    assert abs(ratio - 0.5) < 4 * np.sqrt(0.25 / full.channel_a.size)


@pytest.mark.parametrize("seed", [0, 1])
def test_average_state_matches_master_equation(p_qd1, seed):
    psi0 = (ket(UP) + ket(TUP)) / np.sqrt(2)
    times = np.array([0.2, 1.0, 3.0])
    cfg = tr.TrajectoryConfig(2000, 1.0, seed=seed, block_size=500)
    est = tr.average_state(p_qd1, psi0, times, cfg)
    L = generator(p_qd1)
    rho0 = np.outer(psi0, psi0.conj())
    for t, mean, se in zip(est.times, est.mean, est.stderr):
        rho = qsys.propagate(L, rho0, t)
        zr = np.abs(mean.real - rho.real) / np.maximum(se.real, 1e-9)
        zi = np.abs(mean.imag - rho.imag) / np.maximum(se.imag, 1e-9)
        assert max(zr.max(), zi.max()) < 4.5
        assert abs(np.trace(mean) - 1) < 1e-9


def test_initial_states_reproduce_steady_state(p_qd1, rng):
    rho = steady_state(p_qd1)
    psi = tr._sample_initial(rho, 20000, rng)
    emp = np.einsum("ki,kj->ij", psi, psi.conj()) / psi.shape[0]
    assert np.allclose(emp, rho, atol=0.02)
