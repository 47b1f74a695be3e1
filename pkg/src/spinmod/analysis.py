"""Curve fits and feature extraction used by the scenario runners."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import find_peaks


@dataclass(frozen=True)
class OscillationFit:
    omega: float  # rad/ns
    decay_time: float  # ns, 1/e time of the envelope
    amplitude: float
    phase: float
    offset: float = 0.0

    @property
    def freq_mhz(self) -> float:
        return self.omega / (2 * np.pi) * 1e3


def dominant_frequency(tau, y) -> float:
    """Angular frequency of the largest non-DC Fourier component."""
    tau = np.asarray(tau)
    y = np.asarray(y, dtype=float) - np.mean(y)
    n = 8 * y.size
    F = np.abs(np.fft.rfft(y, n))
    w = 2 * np.pi * np.fft.rfftfreq(n, tau[1] - tau[0])
    F[0] = 0
    return float(w[np.argmax(F)])


def _abs_damped_cos(t, a, T, w, phi):
    return a * np.exp(-t / T) * np.abs(np.cos(w * t + phi))


def fit_abs_damped_cosine(tau, y, omega_guess=None, decay_guess=None, tmin=0.0) -> OscillationFit:
    """Fit a·e^{-τ/T}·|cos(ωτ + φ)|, the shape of a precessing visibility."""
    tau = np.asarray(tau)
    y = np.asarray(y, dtype=float)
    m = tau >= tmin
    if omega_guess is None:
        omega_guess = dominant_frequency(tau[m], y[m]) / 2
    if decay_guess is None:
        decay_guess = tau[-1] / 4
    p0 = [y[m][0] or 1.0, decay_guess, omega_guess, 0.0]
    popt, _ = curve_fit(_abs_damped_cos, tau[m], y[m], p0=p0, maxfev=20000)
    a, T, w, phi = popt
    return OscillationFit(abs(w), T, a, phi)


def _damped_cos(t, c, a, T, w, phi):
    return c + a * np.exp(-t / T) * np.cos(w * t + phi)


def fit_damped_oscillation(tau, y, omega_guess=None, decay_guess=None, tmin=0.0) -> OscillationFit:
    """Fit c + a·e^{-τ/T}·cos(ωτ + φ)."""
    tau = np.asarray(tau)
    y = np.asarray(y, dtype=float)
    m = tau >= tmin
    t, v = tau[m], y[m]
    if omega_guess is None:
        omega_guess = dominant_frequency(t, v)
    if decay_guess is None:
        decay_guess = (t[-1] - t[0]) / 4
    c0 = float(np.mean(v[-max(1, v.size // 10):]))
    a0 = float(np.max(np.abs(v - c0)))
    best = None
    for phi0 in (0.0, np.pi / 2, np.pi, -np.pi / 2):
        try:
            popt, _ = curve_fit(_damped_cos, t, v, p0=[c0, a0, decay_guess, omega_guess, phi0], maxfev=20000)
        except RuntimeError:
            continue
        res = np.sum((_damped_cos(t, *popt) - v) ** 2)
        if best is None or res < best[0]:
            best = (res, popt)
    if best is None:
        raise RuntimeError("damped-oscillation fit did not converge")
    c, a, T, w, phi = best[1]
    if a < 0:
        a, phi = -a, phi + np.pi
    return OscillationFit(abs(w), T, a, phi, c)


def peak_to_peak(tau, y, tmin=0.0, tmax=None) -> float:
    tau = np.asarray(tau)
    m = tau >= tmin
    if tmax is not None:
        m &= tau <= tmax
    v = np.asarray(y, dtype=float)[m]
    return float(v.max() - v.min())


def spectral_peaks(omega, S, rel_prominence=0.05) -> np.ndarray:
    """Positions of the local maxima whose prominence exceeds a fraction of the maximum."""
    S = np.asarray(S)
    idx, _ = find_peaks(S, prominence=rel_prominence * S.max())
    return np.asarray(omega)[idx]


def _lorentz(w, w0, hwhm):
    return 1.0 / (1.0 + ((w - w0) / hwhm) ** 2)


def _pair_model(w, a1, w1, h1, a2, w2, h2, b, hb):
    return a1 * _lorentz(w, w1, h1) + a2 * _lorentz(w, w2, h2) + b * _lorentz(w, 0.0, hb)


@dataclass(frozen=True)
class PeakPairFit:
    centers: tuple[float, float]
    fwhm: tuple[float, float]

    @property
    def separation(self) -> float:
        return abs(self.centers[1] - self.centers[0])


def fit_lorentzian_pair(omega, S, guess_split, broad_width) -> PeakPairFit:
    """Two sideband Lorentzians over a broad Lorentzian background at the drive."""
    omega = np.asarray(omega)
    S = np.asarray(S)
    peak = S.max()
    h0 = guess_split / 4
    p0 = [peak, -guess_split / 2, h0, peak, guess_split / 2, h0, 0.05 * peak, broad_width]
    popt, _ = curve_fit(_pair_model, omega, S, p0=p0, maxfev=50000)
    (a1, w1, h1, a2, w2, h2, b, hb) = popt
    order = np.argsort([w1, w2])
    centers = np.array([w1, w2])[order]
    widths = 2 * np.abs(np.array([h1, h2]))[order]
    return PeakPairFit(tuple(centers), tuple(widths))


def envelope_at_maxima(tau, y, omega) -> tuple[np.ndarray, np.ndarray]:
    """Samples of |y| at the maxima of |cos(ωτ)|, i.e. τ = kπ/ω."""
    tau = np.asarray(tau)
    k = np.arange(0, int(tau[-1] * omega / np.pi) + 1)
    tk = k * np.pi / omega
    return tk, np.interp(tk, tau, np.abs(y))


def first_crossing(tau, y, level) -> float:
    """First τ at which y drops to ``level`` (linear interpolation)."""
    tau = np.asarray(tau)
    y = np.asarray(y)
    below = np.flatnonzero(y <= level)
    if below.size == 0:
        return np.inf
    i = below[0]
    if i == 0:
        return float(tau[0])
    return float(np.interp(level, [y[i], y[i - 1]], [tau[i], tau[i - 1]]))
