"""Quasi-static ensemble averages and detector response.

Spectral jitter and Overhauser jitter are frozen during a scattering event
and uncorrelated between events, so unnormalized correlations are averaged
over the noise and normalized afterwards.  Gaussian averages use
Gauss–Hermite quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import dynamics as dyn
from .dynamics import CorrelationSeries, HomodyneConfig, SpectrumSeries
from .trion import MarkovianSpin, QuasistaticSpin, TrionParams

FWHM_TO_SIGMA = 1.0 / (2 * np.sqrt(2 * np.log(2)))
OBSERVABLES = ("g1", "g2", "g2_hom", "spectrum")
# Gauss–Hermite nodes needed per unit fwhm/Γ to resolve the Lorentzian response
NODES_PER_FWHM = 8.0


@dataclass(frozen=True)
class JitterModel:
    kind: str  # "gaussian_detuning" or "gaussian_overhauser"
    fwhm: float  # rad/ns
    n_samples: int = 21

    def __post_init__(self):
        if self.kind not in ("gaussian_detuning", "gaussian_overhauser"):
            raise ValueError(f"unknown jitter kind {self.kind!r}")
        if self.fwhm < 0:
            raise ValueError("fwhm must be non-negative")
        if self.n_samples < 3:
            raise ValueError("n_samples must be at least 3")

    @property
    def sigma(self) -> float:
        return self.fwhm * FWHM_TO_SIGMA

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Offsets (rad/ns) and weights summing to one."""
        if self.fwhm == 0:
            return np.zeros(1), np.ones(1)
        x, w = np.polynomial.hermite_e.hermegauss(self.n_samples)
        return self.sigma * x, w / w.sum()

    @classmethod
    def overhauser_for_envelope(cls, t2star: float, n_samples: int = 21) -> "JitterModel":
        """Overhauser spread whose Gaussian envelope falls to 1/e at ``t2star``."""
        return cls("gaussian_overhauser", np.sqrt(2) / t2star / FWHM_TO_SIGMA, n_samples)


def required_nodes(fwhm: float, gamma: float) -> int:
    return int(np.ceil(NODES_PER_FWHM * fwhm / gamma))


def overhauser_nodes(sigma: float, tau_max: float, minimum: int = 21) -> int:
    """Odd node count that keeps Gauss–Hermite revivals beyond ``tau_max``.

    An n-node rule reproduces exp(-(στ)²/2) until roughly στ ≈ √n.
    """
    n = max(minimum, int(np.ceil((sigma * tau_max) ** 2)) + 1)
    return n + 1 - n % 2


@dataclass(frozen=True)
class DetectorModel:
    jitter_sigma: float = 0.0  # ns, per detector
    efficiency: float = 1.0
    bin_width: float = 0.256  # ns

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")
        if not 0 <= self.efficiency <= 1:
            raise ValueError("efficiency must lie in [0, 1]")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")


def _average(members: list[TrionParams], weights, observable: str, tau=None,
             homodyne: HomodyneConfig | None = None, **spectrum_kw):
    """Weighted average of unnormalized correlations, normalized at the end.

    Members are reduced in their given order so results are reproducible.
    """
    if observable not in OBSERVABLES:
        raise ValueError(f"observable must be one of {OBSERVABLES}")
    if observable == "spectrum":
        spectra = [dyn.spectrum(dyn.raw_g1(m, tau), **spectrum_kw) for m in members]
        S = sum(w * s.values for w, s in zip(weights, spectra))
        return SpectrumSeries(spectra[0].omega, S)
    acc = 0.0
    I = 0.0
    for m, w in zip(members, weights):
        if observable == "g1":
            raw = dyn.raw_g1(m, tau).values
            i = raw[0].real
        elif observable == "g2":
            series, i = dyn.raw_g2(m, tau)
            raw = series.values
        else:
            if homodyne is None:
                raise ValueError("g2_hom averaging needs a HomodyneConfig")
            raw, i = dyn.raw_g2_hom(m, homodyne, tau)
        acc = acc + w * raw
        I += w * i
    dyn._require_field(I)
    tau = np.asarray(tau, float)
    if observable == "g1":
        # divide parts separately: complex/real division is not exact at τ = 0
        return CorrelationSeries(tau, acc.real / I + 1j * (acc.imag / I), "g1", I)
    return CorrelationSeries(tau, np.real(acc) / I**2, observable, I**2)


def average_over_detuning(p: TrionParams, j: JitterModel, observable: str, tau=None,
                          homodyne: HomodyneConfig | None = None, **spectrum_kw):
    """Average an observable over a Gaussian spread of QD–laser detuning."""
    if j.kind != "gaussian_detuning":
        raise ValueError("average_over_detuning needs a gaussian_detuning model")
    need = required_nodes(j.fwhm, p.gamma)
    if j.fwhm > 0 and j.n_samples < need:
        raise ValueError(f"{j.n_samples} quadrature nodes too few for fwhm/Γ = {j.fwhm / p.gamma:.2f}; need {need}")
    offsets, weights = j.nodes()
    members = [p.replace(delta=p.delta + d) for d in offsets]
    return _average(members, weights, observable, tau, homodyne, **spectrum_kw)


def average_over_overhauser(p: TrionParams, j: JitterModel, observable: str, tau=None,
                            homodyne: HomodyneConfig | None = None, **spectrum_kw):
    """Average over a frozen Gaussian shift of the electron precession frequency.

    ``j.sigma`` is the standard deviation of the precession frequency 2ω_b,
    which turns cos(2ω_b τ) into cos(2ω_b τ)·exp(-(σ τ)²/2).
    """
    if j.kind != "gaussian_overhauser":
        raise ValueError("average_over_overhauser needs a gaussian_overhauser model")
    if p.spin_rate > 0:
        raise ValueError("Markovian spin dephasing is already set; Overhauser averaging would count T2* twice")
    offsets, weights = j.nodes()
    base = p.replace(spin_dephasing=MarkovianSpin(0.0))
    members = [base.replace(omega_b=p.omega_b + 0.5 * d) for d in offsets]
    return _average(members, weights, observable, tau, homodyne, **spectrum_kw)


def average(p: TrionParams, j: JitterModel | None, observable: str, tau=None, **kw):
    """Dispatch on the jitter kind; ``None`` or zero width means no averaging."""
    if j is None:
        if isinstance(p.spin_dephasing, QuasistaticSpin) and p.spin_dephasing.sigma > 0:
            sigma = p.spin_dephasing.sigma
            t_max = float(np.max(tau)) if tau is not None else 0.0
            j = JitterModel("gaussian_overhauser", sigma / FWHM_TO_SIGMA, overhauser_nodes(sigma, t_max))
        else:
            return _average([p], [1.0], observable, tau, **kw)
    if j.kind == "gaussian_detuning":
        return average_over_detuning(p, j, observable, tau, **kw)
    return average_over_overhauser(p, j, observable, tau, **kw)


def convolve_detector_jitter(series: CorrelationSeries, d: DetectorModel) -> CorrelationSeries:
    """Convolve with the combined timing response of two detectors.

    The start-stop delay jitter is Gaussian with standard deviation
    √2·jitter_sigma.  Negative delays are filled from the symmetry
    G(-τ) = conj G(τ); the far end is extended with its last value.
    """
    if d.jitter_sigma == 0:
        return series
    dt = series.dt
    if dt > d.jitter_sigma / 2:
        raise ValueError(f"grid step {dt:.4g} ns too coarse for {d.jitter_sigma:.4g} ns jitter; need ≤ {d.jitter_sigma / 2:.4g} ns")
    v = np.asarray(series.values)
    full = np.concatenate([np.conj(v[:0:-1]), v])
    sigma_bins = np.sqrt(2) * d.jitter_sigma / dt
    if np.iscomplexobj(full):
        out = (gaussian_filter1d(full.real, sigma_bins, mode="nearest", truncate=8.0)
               + 1j * gaussian_filter1d(full.imag, sigma_bins, mode="nearest", truncate=8.0))
    else:
        out = gaussian_filter1d(full, sigma_bins, mode="nearest", truncate=8.0)
    return series.with_values(out[v.size - 1:])


@dataclass(frozen=True)
class DetuningScan:
    deltas: np.ndarray
    omega: np.ndarray
    spectra: np.ndarray  # (n_delta, n_omega)
    intensities: np.ndarray  # V-port flux per detuning

    def series(self, i: int) -> SpectrumSeries:
        return SpectrumSeries(self.omega, self.spectra[i])


def detuning_scan(p: TrionParams, deltas, tau=None, **spectrum_kw) -> DetuningScan:
    """One spectrum per detuning on a shared τ grid (hence a shared ω grid)."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if deltas.size == 0:
        raise ValueError("detuning list is empty")
    if tau is None:
        tau = dyn.default_tau_grid(p)
    spectra, intensities, omega = [], [], None
    for d in deltas:
        q = p.replace(delta=float(d))
        s = dyn.spectrum(dyn.raw_g1(q, tau), **spectrum_kw)
        omega = s.omega
        spectra.append(s.values)
        intensities.append(dyn.v_intensity(q))
    return DetuningScan(deltas, omega, np.array(spectra), np.array(intensities))
