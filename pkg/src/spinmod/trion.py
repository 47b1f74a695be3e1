"""Four-level trion model in a Voigt magnetic field.

Basis order is fixed: index 0..3 = (up, down, trion_up, trion_down), i.e.
``|↑>, |↓>, |⇑>, |⇓>``.  sigma+ couples ↑<->⇑ and sigma- couples ↓<->⇓.
Internal units are ns and rad/ns.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import constants

from .qsys import Superoperator, liouvillian

UP, DOWN, TUP, TDOWN = 0, 1, 2, 3
BASIS_LABELS = ("↑", "↓", "⇑", "⇓")
DIM = 4

# mu_B / h in GHz per tesla
BOHR_GHZ_PER_T = constants.physical_constants["Bohr magneton in Hz/T"][0] * 1e-9
# 1 micro-eV expressed as angular frequency in rad/ns
UEV_TO_RAD_PER_NS = 1e-6 * constants.e / constants.hbar * 1e-9
WEAK_DRIVE_LIMIT = 0.3


def ket(i: int) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    v[i] = 1.0
    return v


def op(i: int, j: int) -> np.ndarray:
    """|i><j|"""
    m = np.zeros((DIM, DIM), dtype=complex)
    m[i, j] = 1.0
    return m


def mhz_to_rad(f_mhz: float) -> float:
    return 2 * np.pi * f_mhz * 1e-3


def rad_to_mhz(w: float) -> float:
    return w / (2 * np.pi) * 1e3


@dataclass(frozen=True)
class MarkovianSpin:
    """Spin dephasing as a Lindblad rate (1/T2*), rad/ns."""

    rate: float = 0.0


@dataclass(frozen=True)
class QuasistaticSpin:
    """Spin dephasing from a frozen Gaussian Overhauser shift of the
    precession frequency, standard deviation ``sigma`` in rad/ns."""

    sigma: float = 0.0


SpinDephasing = Union[MarkovianSpin, QuasistaticSpin]


@dataclass(frozen=True)
class TrionParams:
    gamma: float
    omega_b: float = 0.0
    omega_h: float = 0.0
    delta: float = 0.0
    omega_rabi: float = 0.0
    gamma_opt_deph: float = 0.0
    spin_dephasing: SpinDephasing = field(default_factory=MarkovianSpin)

    def __post_init__(self):
        for name in ("gamma", "omega_rabi", "gamma_opt_deph"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        sd = self.spin_dephasing
        if isinstance(sd, MarkovianSpin) and sd.rate < 0:
            raise ValueError("spin dephasing rate must be non-negative")
        if isinstance(sd, QuasistaticSpin) and sd.sigma < 0:
            raise ValueError("Overhauser sigma must be non-negative")
        if self.gamma > 0 and self.omega_rabi > WEAK_DRIVE_LIMIT * self.gamma:
            warnings.warn(
                f"drive Ω = {self.omega_rabi / self.gamma:.2f}Γ is outside the weak-excitation regime",
                stacklevel=2,
            )

    @property
    def spin_rate(self) -> float:
        sd = self.spin_dephasing
        return sd.rate if isinstance(sd, MarkovianSpin) else 0.0

    @property
    def larmor(self) -> float:
        """Full precession angular frequency 2ω_b."""
        return 2 * self.omega_b

    def replace(self, **changes) -> "TrionParams":
        return replace(self, **changes)

    def max_rate(self) -> float:
        return max(self.gamma, self.omega_rabi, abs(self.delta), 2 * abs(self.omega_b),
                   2 * abs(self.omega_h), self.gamma_opt_deph, self.spin_rate)


@dataclass(frozen=True)
class PhysicalInputs:
    t1: float  # ns
    b_field: float = 0.0  # T
    g_b: float = 0.0
    g_h: float = 0.0
    p_over_psat: float = 0.0

    def __post_init__(self):
        if self.t1 <= 0:
            raise ValueError("t1 must be positive")
        if self.b_field < 0 or self.p_over_psat < 0:
            raise ValueError("b_field and p_over_psat must be non-negative")


def larmor_splitting(g: float, b_field: float) -> float:
    """Precession angular frequency 2ω_b = g μ_B B / ħ in rad/ns."""
    if b_field < 0:
        raise ValueError("b_field must be non-negative")
    return 2 * np.pi * BOHR_GHZ_PER_T * abs(g) * b_field


def rabi_from_power(gamma: float, p_over_psat: float) -> float:
    """Ω = Ω_sat √(P/P_sat) with the saturation convention Ω_sat = Γ/√2."""
    return gamma / np.sqrt(2) * np.sqrt(p_over_psat)


def from_physical(inputs: PhysicalInputs, **overrides) -> TrionParams:
    gamma = 1.0 / inputs.t1
    values = dict(
        gamma=gamma,
        omega_b=0.5 * larmor_splitting(inputs.g_b, inputs.b_field),
        omega_h=0.5 * larmor_splitting(inputs.g_h, inputs.b_field),
        omega_rabi=rabi_from_power(gamma, inputs.p_over_psat),
    )
    values.update(overrides)
    return TrionParams(**values)


def build_hamiltonian(p: TrionParams) -> np.ndarray:
    """Hamiltonian in the frame rotating at the drive frequency."""
    H = p.delta * (op(TUP, TUP) + op(TDOWN, TDOWN))
    H = H + p.omega_b * (op(UP, DOWN) + op(DOWN, UP))
    H = H + p.omega_h * (op(TUP, TDOWN) + op(TDOWN, TUP))
    drive = 0.5 * p.omega_rabi * (op(TUP, UP) + op(TDOWN, DOWN))
    return H + drive + drive.conj().T


def spin_dephasing_ops(rate: float) -> list[np.ndarray]:
    """Isotropic spin dephasing: every Bloch component of the spin decays at ``rate``.

    The Pauli operators act on the spin label in both manifolds, so the optical
    and spin degrees of freedom stay separable.
    """
    if rate <= 0:
        return []
    sx = op(UP, DOWN) + op(DOWN, UP) + op(TUP, TDOWN) + op(TDOWN, TUP)
    sy = -1j * (op(UP, DOWN) + op(TUP, TDOWN))
    sy = sy + sy.conj().T
    sz = op(UP, UP) - op(DOWN, DOWN) + op(TUP, TUP) - op(TDOWN, TDOWN)
    return [np.sqrt(rate / 4) * s for s in (sx, sy, sz)]


def build_collapse_ops(p: TrionParams) -> list[np.ndarray]:
    ops = []
    if p.gamma > 0:
        ops.append(np.sqrt(p.gamma) * op(UP, TUP))
        ops.append(np.sqrt(p.gamma) * op(DOWN, TDOWN))
    if p.gamma_opt_deph > 0:
        ops.append(np.sqrt(2 * p.gamma_opt_deph) * (op(TUP, TUP) + op(TDOWN, TDOWN)))
    ops.extend(spin_dephasing_ops(p.spin_rate))
    return ops


def v_port_field_op(p: TrionParams) -> np.ndarray:
    """Cross-polarized (V) field operator; the two spin branches enter with opposite sign."""
    return np.sqrt(p.gamma / 2) * (op(UP, TUP) - op(DOWN, TDOWN))


def h_port_field_op(p: TrionParams) -> np.ndarray:
    """Co-polarized (H) field operator."""
    return np.sqrt(p.gamma / 2) * (op(UP, TUP) + op(DOWN, TDOWN))


def generator(p: TrionParams) -> Superoperator:
    return liouvillian(build_hamiltonian(p), build_collapse_ops(p))


def radiative_ops(p: TrionParams) -> list[np.ndarray]:
    """Collapse set with the radiative channel written in the H/V port basis.

    Generates the same Liouvillian as :func:`build_collapse_ops`.
    """
    ops = [h_port_field_op(p), v_port_field_op(p)] if p.gamma > 0 else []
    if p.gamma_opt_deph > 0:
        ops.append(np.sqrt(2 * p.gamma_opt_deph) * (op(TUP, TUP) + op(TDOWN, TDOWN)))
    ops.extend(spin_dephasing_ops(p.spin_rate))
    return ops


def two_level_reduction(p: TrionParams) -> tuple[Superoperator, np.ndarray]:
    """Generator and field operator of the ↑ ↔ ⇑ transition alone.

    Every operator of the full model is projected onto span{|↑⟩, |⇑⟩}; spin
    mixing drops out, which is the zero-field limit with the ↓ branch empty.
    """
    keep = [UP, TUP]
    proj = lambda m: m[np.ix_(keep, keep)]  # noqa: E731
    ops = [proj(L) for L in build_collapse_ops(p.replace(spin_dephasing=MarkovianSpin(0.0)))]
    ops = [L for L in ops if np.any(L)]
    return liouvillian(proj(build_hamiltonian(p)), ops), proj(v_port_field_op(p))


def sigma_z_ground() -> np.ndarray:
    return op(UP, UP) - op(DOWN, DOWN)


def larmor_mode(p: TrionParams) -> complex:
    """Liouvillian eigenvalue of the spin-precession mode, ``-1/T + i·2ω_b,eff``.

    Picks the eigenvalue with positive imaginary part closest to the bare
    precession frequency; for zero field, the slowest nonzero decay.
    """
    ev = np.linalg.eigvals(generator(p).action)
    if p.omega_b == 0:
        ev = ev[np.abs(ev) > 1e-9]
        return complex(ev[np.argmax(ev.real)])
    cand = ev[ev.imag > 0]
    return complex(cand[np.argmin(np.abs(cand - (-p.spin_rate + 1j * p.larmor)))])


def calibrate_spin_rate(p: TrionParams, envelope_time: float) -> TrionParams:
    """Return ``p`` with the Markovian spin rate chosen so that the precession
    envelope of the full driven model decays with 1/e time ``envelope_time``.

    A measured T2* already contains the dephasing caused by the scattering
    itself (each V photon applies σ_z to the spin), so the intrinsic rate is
    what remains after that contribution.
    """
    from scipy.optimize import brentq

    target = 1.0 / envelope_time

    def excess(rate):
        return -larmor_mode(p.replace(spin_dephasing=MarkovianSpin(rate))).real - target

    if excess(0.0) > 0:
        raise ValueError(
            f"drive-induced dephasing alone gives an envelope shorter than {envelope_time} ns"
        )
    hi = 2 * target
    while excess(hi) < 0:
        hi *= 2
    rate = brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-12)
    return p.replace(spin_dephasing=MarkovianSpin(rate))
