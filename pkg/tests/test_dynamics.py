import numpy as np
import pytest

from spinmod import dynamics as dyn
from spinmod.analysis import fit_damped_oscillation, fit_lorentzian_pair, peak_to_peak, spectral_peaks
from spinmod.trion import MarkovianSpin, TrionParams, calibrate_spin_rate, two_level_reduction

from conftest import GAMMA

QUARTER = 1 / (4 * 0.59)  # ns


@pytest.fixture(scope="module")
def tau1(p_qd1):
    return dyn.default_tau_grid(p_qd1)


def test_default_grid(p_qd1, p_qd2):
    t = dyn.default_tau_grid(p_qd1)
    assert t[0] == 0 and t.size >= 4096 and abs(t[-1] - 8 * 2.7) < 1e-9
    t2 = dyn.default_tau_grid(p_qd2)
    assert t2[1] - t2[0] <= dyn.max_tau_step(p_qd2) * (1 + 1e-12)


def test_grid_errors(p_qd1):
    with pytest.raises(ValueError):
        dyn.g1(p_qd1, np.array([0.0, 0.01, 0.03]))
    with pytest.raises(ValueError):
        dyn.g1(p_qd1, np.linspace(0.1, 1, 50))
    with pytest.raises(ValueError):
        dyn.g1(p_qd1, np.linspace(0, 10, 11))


def test_no_scattered_field():
    with pytest.raises(dyn.NoScatteredField):
        dyn.g1(TrionParams(gamma=GAMMA, omega_b=1.0, omega_h=1.0, spin_dephasing=MarkovianSpin(0.3)),
               np.linspace(0, 1, 201))


def test_g1_normalization_and_zeros(p_qd1, tau1):
    s = dyn.g1(p_qd1, tau1)
    assert abs(abs(s.values[0]) - 1) < 1e-9
    a = np.abs(s.values)
    window = (tau1 > 0.3) & (tau1 < 0.55)
    t_zero = tau1[window][np.argmin(a[window])]
    assert abs(t_zero - QUARTER) <= tau1[1] - tau1[0]
    assert a[np.argmin(np.abs(tau1 - QUARTER))] <= 0.02


def test_g1_envelope_weak_drive(p_qd1):
    p = calibrate_spin_rate(p_qd1.replace(omega_rabi=0.05 * GAMMA, gamma_opt_deph=0.0), 2.7)
    tau = dyn.default_tau_grid(p, tau_max=8.0)
    a = np.abs(dyn.g1(p, tau).values)
    model = np.exp(-tau / 2.7) * np.abs(np.cos(2 * p.omega_b * tau))
    sel = (tau > 5 / GAMMA) & (np.abs(np.cos(2 * p.omega_b * tau)) > 0.5)
    assert np.max(np.abs(a[sel] / model[sel] - 1)) < 0.05


def test_zero_field_monotone(p_qd1, tau1):
    p = p_qd1.replace(omega_b=0.0, omega_h=0.0)
    a = np.abs(dyn.g1(p, tau1).values)
    assert np.all(np.diff(a) <= 1e-12)


def test_g1_hermiticity(p_qd1, tau1):
    fwd = dyn.raw_g1(p_qd1, tau1).values
    assert np.max(np.abs(dyn.g1_reversed(p_qd1, tau1) - np.conj(fwd))) < 1e-12


def test_regression_step_consistency(p_qd1):
    coarse = np.linspace(0, 6, 1201)
    fine = np.linspace(0, 6, 2401)
    assert np.max(np.abs(dyn.g1(p_qd1, coarse).values - dyn.g1(p_qd1, fine).values[::2])) < 1e-6
    assert np.max(np.abs(dyn.g2(p_qd1, coarse).values - dyn.g2(p_qd1, fine).values[::2])) < 1e-6


def test_g2_antibunching_and_baseline(p_qd1, p_qd2):
    for p in (p_qd1, p_qd2):
        tau = dyn.default_tau_grid(p, tau_max=20 * max(2.7, dyn.envelope_time(p)))
        v = dyn.g2(p, tau).values
        assert v[0] <= 0.01
        assert np.all(np.isreal(v)) and v.min() >= -1e-9
        assert abs(v[-1] - 1) < 1e-3


def test_two_level_weak_field_g2():
    p = TrionParams(gamma=GAMMA, omega_rabi=0.02 * GAMMA)
    L, E = two_level_reduction(p)
    tau = np.linspace(0, 5 / GAMMA, 501)
    v = dyn.generic_g2(L, E, tau)
    ref = (1 - np.exp(-GAMMA * tau / 2)) ** 2
    assert np.max(np.abs(v - ref)[1:] / ref[1:]) < 0.01


def test_pure_lo_limit(p_qd1):
    tau = np.linspace(0, 3, 601)
    h = dyn.HomodyneConfig(alpha=1e5 * np.sqrt(dyn.v_intensity(p_qd1)))
    assert np.max(np.abs(dyn.g2_hom(p_qd1, h, tau).values - 1)) < 1e-6


@pytest.fixture(scope="module")
def qd2_hom(p_qd2):
    tau = dyn.default_tau_grid(p_qd2)
    out = {}
    for phi in (0.0, np.pi / 6, np.pi / 3, np.pi / 2, 2 * np.pi / 3, np.pi):
        out[phi] = dyn.g2_hom(p_qd2, dyn.HomodyneConfig.from_intensity_ratio(p_qd2, 10, phi_lo=phi), tau).values
    return tau, out


def test_homodyne_quadratures(qd2_hom):
    tau, out = qd2_hom
    tmin = 5 / GAMMA
    fit = fit_damped_oscillation(tau, out[0.0], tmin=tmin)
    assert abs(fit.freq_mhz - 159) < 5
    assert abs(fit.decay_time - 12.5) < 1.5
    assert peak_to_peak(tau, out[np.pi / 2], tmin) <= 0.05 * peak_to_peak(tau, out[0.0], tmin)


def test_quadrature_amplitude_scaling(qd2_hom):
    tau, out = qd2_hom
    tmin = 5 / GAMMA
    ref = peak_to_peak(tau, out[0.0], tmin)
    for phi, v in out.items():
        if np.cos(phi) ** 2 > 0.2:
            assert abs(peak_to_peak(tau, v, tmin) / ref - np.cos(phi) ** 2) < 0.05


def test_unlocked_average_exact(p_qd2):
    tau = np.linspace(0, 20, 4001)
    h = dyn.HomodyneConfig.from_intensity_ratio(p_qd2, 10, unlocked=True)
    got = dyn.raw_g2_hom(p_qd2, h, tau)[0]
    phis = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    dense = np.mean([dyn.raw_g2_hom(p_qd2, dyn.HomodyneConfig(h.alpha, phi_lo=f), tau)[0] for f in phis], axis=0)
    assert np.max(np.abs(got - dense)) < 1e-12 * max(1, np.max(np.abs(dense)))
    fit = fit_damped_oscillation(tau, got / dyn.raw_g2_hom(p_qd2, h, tau)[1] ** 2, tmin=5 / GAMMA,
                                 omega_guess=2 * p_qd2.omega_b, decay_guess=10.0)
    assert abs(fit.freq_mhz / 159 - 1) < 0.02


def test_phase_noise_reduces_contrast(p_qd2, qd2_hom):
    tau, out = qd2_hom
    h = dyn.HomodyneConfig.from_intensity_ratio(p_qd2, 10, phase_noise_sigma=0.3)
    v = dyn.g2_hom(p_qd2, h, tau).values
    assert peak_to_peak(tau, v, 5 / GAMMA) < peak_to_peak(tau, out[0.0], 5 / GAMMA)


def test_visibility(p_qd1, tau1):
    s = dyn.g1(p_qd1, tau1)
    assert dyn.visibility(s, 1.0)[0] == 1.0
    v = dyn.visibility(s, 0.85)
    assert v[np.argmin(np.abs(tau1 - QUARTER))] < 0.02
    with pytest.raises(ValueError):
        dyn.visibility(s, 0.0)
    with pytest.raises(ValueError):
        dyn.visibility(dyn.g2(p_qd1, tau1), 1.0)


def test_spectrum_of_exponential():
    T = 0.8
    tau = np.linspace(0, 20 * T, 8001)
    s = dyn.spectrum(dyn.CorrelationSeries(tau, np.exp(-tau / T).astype(complex), "raw_G1", 1.0))
    i0 = np.argmin(np.abs(s.omega))
    assert abs(s.values[i0] / (T / np.pi) - 1) < 0.02
    half = s.values > s.values[i0] / 2
    hwhm = 0.5 * (s.omega[half].max() - s.omega[half].min())
    assert abs(hwhm * T - 1) < 0.02


def test_spectrum_errors(p_qd1):
    tau = np.linspace(0, 3, 601)
    with pytest.raises(ValueError, match="need at least"):
        dyn.spectrum(dyn.raw_g1(p_qd1, tau))
    with pytest.raises(ValueError, match="need at least 13.5"):
        dyn.spectrum(dyn.raw_g1(p_qd1, tau), min_tau_max=5 * 2.7)
    with pytest.raises(ValueError):
        dyn.spectrum(dyn.g1(p_qd1, tau))


def test_tuned_spectrum(p_tuned):
    tau = dyn.default_tau_grid(p_tuned)
    raw = dyn.raw_g1(p_tuned, tau)
    s = dyn.spectrum(raw, min_tau_max=5 * 2.7)
    assert s.values.min() >= -1e-9
    assert abs(s.total() / raw.values[0].real - 1) < 0.01
    mean = np.sum(s.omega * s.values) / np.sum(s.values)
    assert abs(mean) <= s.d_omega
    peaks = spectral_peaks(s.omega, s.values)
    assert peaks.size == 2
    fit = fit_lorentzian_pair(s.omega, s.values, 0.6 * GAMMA, GAMMA)
    assert abs(fit.separation / GAMMA - 0.6) < 0.018
    assert max(fit.fwhm) < GAMMA / 2
