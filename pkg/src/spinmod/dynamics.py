"""Two-time correlations by the quantum regression theorem, homodyne mixing,
visibility and emission spectra."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import qsys
from .trion import (
    QuasistaticSpin,
    TrionParams,
    generator,
    h_port_field_op,
    larmor_mode,
    v_port_field_op,
)

KINDS = ("g1", "g2", "g2_hom", "raw_G1", "raw_G2")
DEFAULT_POINTS = 4096
DEFAULT_PAD = 16
MIN_DECAY_TIMES = 5.0
INTENSITY_FLOOR = 1e-14


class NoScatteredField(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationSeries:
    tau: np.ndarray
    values: np.ndarray
    kind: str
    normalization: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        if len(self.tau) != len(self.values):
            raise ValueError("tau and values differ in length")

    @property
    def dt(self) -> float:
        return float(self.tau[1] - self.tau[0])

    def with_values(self, values, **changes) -> "CorrelationSeries":
        fields = dict(tau=self.tau, values=np.asarray(values), kind=self.kind,
                      normalization=self.normalization)
        fields.update(changes)
        return CorrelationSeries(**fields)


@dataclass(frozen=True)
class SpectrumSeries:
    omega: np.ndarray  # rad/ns, offset from the drive
    values: np.ndarray

    @property
    def d_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def total(self) -> float:
        return float(np.sum(self.values) * self.d_omega)


@dataclass(frozen=True)
class HomodyneConfig:
    """Coherent local oscillator ``alpha * exp(i phi_lo)`` added to the V field.

    ``phi_lo`` is measured from the mean phase of the co-polarized scattered
    field, so ``phi_lo = 0`` is the quadrature that carries the spin-dependent
    0/π phase.  ``unlocked`` averages uniformly over the LO phase.
    """

    alpha: float
    phi_lo: float = 0.0
    phase_noise_sigma: float = 0.0
    unlocked: bool = False

    def __post_init__(self):
        if self.alpha < 0 or self.phase_noise_sigma < 0:
            raise ValueError("alpha and phase_noise_sigma must be non-negative")

    @classmethod
    def from_intensity_ratio(cls, p: TrionParams, lo_over_rsf: float, **kw) -> "HomodyneConfig":
        return cls(alpha=float(np.sqrt(lo_over_rsf * v_intensity(p))), **kw)


@lru_cache(maxsize=256)
def _model(p: TrionParams):
    L = generator(p)
    rho = qsys.steady_state(L)
    rho.setflags(write=False)
    return L, rho


@lru_cache(maxsize=256)
def _grid_propagator(p: TrionParams, dt: float) -> np.ndarray:
    M = qsys.step_matrix(_model(p)[0], dt)
    M.setflags(write=False)
    return M


def steady_state(p: TrionParams) -> np.ndarray:
    return _model(p)[1]


def v_intensity(p: TrionParams) -> float:
    """Steady-state V-port photon flux <E_V† E_V> (photons/ns)."""
    E = v_port_field_op(p)
    return float(qsys.expect(E.conj().T @ E, steady_state(p)).real)


def lo_reference_phase(p: TrionParams) -> float:
    mean_h = qsys.expect(h_port_field_op(p), steady_state(p))
    return float(np.angle(mean_h)) if abs(mean_h) > 1e-15 else 0.0


def envelope_time(p: TrionParams) -> float:
    """1/e time of the spin-precession envelope."""
    if isinstance(p.spin_dephasing, QuasistaticSpin) and p.spin_dephasing.sigma > 0:
        return float(np.sqrt(2) / p.spin_dephasing.sigma)
    rate = -larmor_mode(p).real
    return float(1 / rate) if rate > 1e-12 else np.inf


def default_tau_grid(p: TrionParams, n_points: int = DEFAULT_POINTS, tau_max: float | None = None):
    if tau_max is None:
        t2 = envelope_time(p)
        t2 = t2 if np.isfinite(t2) else 50.0 / p.gamma
        tau_max = 8 * max(t2, 5 / p.gamma)
    n_points = max(n_points, int(np.ceil(tau_max / max_tau_step(p))) + 1)
    return np.linspace(0.0, tau_max, n_points)


def max_tau_step(p: TrionParams) -> float:
    scales = [1 / p.gamma] if p.gamma > 0 else []
    if p.omega_b > 0:
        scales.append(np.pi / (2 * p.omega_b))
    return 0.05 * min(scales) if scales else np.inf


def _check_grid(p: TrionParams, tau):
    tau = np.asarray(tau, dtype=float)
    if tau.ndim != 1 or tau.size < 2 or tau[0] != 0:
        raise ValueError("tau grid must be one-dimensional and start at 0")
    dt = tau[1] - tau[0]
    if not np.allclose(np.diff(tau), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("tau grid must be uniform")
    if dt > max_tau_step(p) * (1 + 1e-9):
        raise ValueError(f"tau step {dt:.4g} ns exceeds {max_tau_step(p):.4g} ns")
    return tau, float(dt)


def _regress(p: TrionParams, tau, v0: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Tr[A e^{Lτ} X0] on the grid, with X0 given vectorized as ``v0``."""
    tau, dt = _check_grid(p, tau)
    M = _grid_propagator(p, dt)
    a = qsys.vec(A.T)
    out = np.empty(tau.size, dtype=complex)
    v = v0
    for k in range(tau.size):
        out[k] = a @ v
        v = M @ v
    return out


def _require_field(intensity: float):
    if intensity <= INTENSITY_FLOOR:
        raise NoScatteredField("no scattered field: steady-state V intensity is zero")


def raw_g1(p: TrionParams, tau, field_op: np.ndarray | None = None) -> CorrelationSeries:
    """Unnormalized G1(τ) = <E†(τ) E(0)>."""
    E = v_port_field_op(p) if field_op is None else field_op
    rho = steady_state(p)
    G = _regress(p, tau, qsys.vec(E @ rho), E.conj().T)
    G[0] = G[0].real  # <E†E> is real; drop roundoff so g1(0) = 1 exactly
    return CorrelationSeries(np.asarray(tau, float), G, "raw_G1", 1.0)


def g1(p: TrionParams, tau) -> CorrelationSeries:
    raw = raw_g1(p, tau)
    I = raw.values[0].real
    _require_field(I)
    return raw.with_values(raw.values.real / I + 1j * (raw.values.imag / I), kind="g1", normalization=I)


def g1_reversed(p: TrionParams, tau) -> np.ndarray:
    """<E†(0) E(τ)>, which equals conj(G1(τ)) for a stationary field."""
    E = v_port_field_op(p)
    rho = steady_state(p)
    return _regress(p, tau, qsys.vec(rho @ E.conj().T), E)


def _raw_g2_for(p: TrionParams, tau, E: np.ndarray) -> tuple[np.ndarray, float]:
    rho = steady_state(p)
    Ed = E.conj().T
    G2 = _regress(p, tau, qsys.vec(E @ rho @ Ed), Ed @ E)
    return G2.real, float(qsys.expect(Ed @ E, rho).real)


def raw_g2(p: TrionParams, tau) -> tuple[CorrelationSeries, float]:
    """Unnormalized G2(τ) and the steady-state intensity."""
    G2, I = _raw_g2_for(p, tau, v_port_field_op(p))
    return CorrelationSeries(np.asarray(tau, float), G2, "raw_G2", 1.0), I


def g2(p: TrionParams, tau) -> CorrelationSeries:
    raw, I = raw_g2(p, tau)
    _require_field(I)
    return raw.with_values(raw.values / I**2, kind="g2", normalization=I**2)


def raw_cross_g2(p: TrionParams, A: np.ndarray, B: np.ndarray, tau) -> tuple[np.ndarray, float, float]:
    """<A†(0) B†(τ) B(τ) A(0)> for τ ≥ 0 (a B click τ after an A click) and both intensities."""
    rho = steady_state(p)
    Ad, Bd = A.conj().T, B.conj().T
    G = _regress(p, tau, qsys.vec(A @ rho @ Ad), Bd @ B)
    return G.real, float(qsys.expect(Ad @ A, rho).real), float(qsys.expect(Bd @ B, rho).real)


def homodyne_ports(p: TrionParams, alpha: float, phi_lo: float) -> tuple[np.ndarray, np.ndarray]:
    """Balanced-splitter outputs (β ± E_V)/√2 with β = α e^{i(φ_LO + θ_ref)}."""
    E = v_port_field_op(p)
    beta = alpha * np.exp(1j * (phi_lo + lo_reference_phase(p))) * np.eye(E.shape[0])
    return (beta + E) / np.sqrt(2), (beta - E) / np.sqrt(2)


def generic_g2(L: qsys.Superoperator, E: np.ndarray, tau) -> np.ndarray:
    """Normalized g2 of field ``E`` for an arbitrary generator on a uniform grid."""
    tau = np.asarray(tau, float)
    rho = qsys.steady_state(L)
    Ed = E.conj().T
    I = float(qsys.expect(Ed @ E, rho).real)
    _require_field(I)
    dt = float(tau[1] - tau[0])
    Vs = qsys.propagate_grid(L, qsys.vec(E @ rho @ Ed), dt, tau.size)
    return (Vs @ qsys.vec((Ed @ E).T)).real / I**2


def _phase_nodes(h: HomodyneConfig) -> tuple[np.ndarray, np.ndarray]:
    if h.unlocked:
        # G2 is a trigonometric polynomial of degree 2 in the LO phase:
        # eight equally spaced phases average it exactly
        phis = np.arange(8) * (2 * np.pi / 8)
        return phis, np.full(8, 1 / 8)
    if h.phase_noise_sigma > 0:
        x, w = np.polynomial.hermite_e.hermegauss(21)
        return h.phi_lo + h.phase_noise_sigma * x, w / w.sum()
    return np.array([h.phi_lo]), np.array([1.0])


def raw_g2_hom(p: TrionParams, h: HomodyneConfig, tau) -> tuple[np.ndarray, float]:
    """Phase-averaged G2 of E_tot = α e^{iφ} + E_V, and the mean intensity."""
    E = v_port_field_op(p)
    ref = lo_reference_phase(p)
    G2 = np.zeros(len(tau))
    I = 0.0
    for phi, w in zip(*_phase_nodes(h)):
        Etot = h.alpha * np.exp(1j * (phi + ref)) * np.eye(E.shape[0]) + E
        g, i = _raw_g2_for(p, tau, Etot)
        G2 += w * g
        I += w * i
    return G2, I


def g2_hom(p: TrionParams, h: HomodyneConfig, tau) -> CorrelationSeries:
    _require_field(v_intensity(p))
    G2, I = raw_g2_hom(p, h, tau)
    return CorrelationSeries(np.asarray(tau, float), G2 / I**2, "g2_hom", I**2)


def visibility(series: CorrelationSeries, v0: float = 1.0) -> np.ndarray:
    """Interferometer fringe visibility v0·|g1(τ)|."""
    if not 0 < v0 <= 1:
        raise ValueError("v0 must lie in (0, 1]")
    values = series.values
    if series.kind == "raw_G1":
        values = values / values[0].real
    elif series.kind != "g1":
        raise ValueError("visibility needs a first-order correlation")
    return v0 * np.abs(values)


def spectrum(series: CorrelationSeries, pad_factor: int = DEFAULT_PAD,
             omega_max: float | None = None, min_tau_max: float | None = None) -> SpectrumSeries:
    """S(ω) = (1/π) Re ∫_0^∞ G1(τ) e^{-iωτ} dτ relative to the drive.

    Positive ω is blue of the drive.  The integral is a trapezoid sum on the
    τ grid, zero-padded to ``pad_factor`` times its length before the FFT, so
    the frequency bin is 2π/(pad_factor·N·dτ).  ``min_tau_max`` (e.g. 5·T2*)
    is enforced when given; otherwise G1 must have decayed by e^-5.
    """
    if series.kind != "raw_G1":
        raise ValueError("spectrum needs an unnormalized raw_G1 series")
    G = np.asarray(series.values, dtype=complex)
    tau_max = float(series.tau[-1])
    if min_tau_max is not None:
        if tau_max < min_tau_max:
            raise ValueError(f"tau_max = {tau_max:.3g} ns too short; need at least {min_tau_max:.3g} ns")
    else:
        g0 = abs(G[0])
        tail = np.max(np.abs(G[-max(2, G.size // 10):]))
        if g0 == 0 or tail > np.exp(-MIN_DECAY_TIMES) * g0:
            ratio = tail / g0 if g0 else 1.0
            need = tau_max * MIN_DECAY_TIMES / max(-np.log(max(ratio, 1e-300)), 1e-3)
            raise ValueError(
                f"G1 has not decayed over tau_max = {tau_max:.3g} ns; need at least {need:.3g} ns"
            )
    dt = series.dt
    w = G.copy()
    w[0] *= 0.5
    n = pad_factor * G.size
    F = np.fft.fftshift(np.fft.fft(w, n))
    omega = np.fft.fftshift(np.fft.fftfreq(n, d=dt)) * 2 * np.pi
    S = dt / np.pi * F.real
    if omega_max is not None:
        keep = np.abs(omega) <= omega_max
        omega, S = omega[keep], S[keep]
    return SpectrumSeries(omega, S)


def spectrum_for(p: TrionParams, n_points: int = DEFAULT_POINTS, pad_factor: int = DEFAULT_PAD,
                 omega_max: float | None = None, tau_max: float | None = None) -> SpectrumSeries:
    tau = default_tau_grid(p, n_points, tau_max)
    return spectrum(raw_g1(p, tau), pad_factor=pad_factor, omega_max=omega_max)
