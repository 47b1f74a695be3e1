"""Weak-excitation reflection from a single-sided cavity holding a charged dot.

An H-polarized input is decomposed into σ±; the spin state selects which
circular component sees the dot.  The cross-polarized (V) output then carries
the difference of the empty and dot-loaded reflection coefficients, with
opposite sign for the two spin states.

All coefficients are referenced to the phase of the empty-cavity reflection,
so only phase differences are meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12


@dataclass(frozen=True)
class CavityParams:
    kappa: float  # total cavity decay, rad/ns
    kappa_ext: float  # top-mirror coupling, rad/ns
    g_coupling: float  # dot-cavity coupling, rad/ns
    gamma_x: float  # transition linewidth, rad/ns
    delta_c: float = 0.0  # cavity-laser detuning, rad/ns

    def __post_init__(self):
        if min(self.kappa, self.kappa_ext, self.g_coupling, self.gamma_x) < 0:
            raise ValueError("cavity rates must be non-negative")
        if self.kappa_ext > self.kappa:
            raise ValueError("kappa_ext cannot exceed kappa")

    @classmethod
    def for_beta(cls, beta: float, kappa: float = 1.0, gamma_x: float = 1.0, **kw) -> "CavityParams":
        """Perfect-outcoupling cavity whose coupling gives β-factor ``beta``."""
        if not 0 <= beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        fp = beta / (1 - beta)
        g = np.sqrt(fp * kappa * gamma_x / 4)
        return cls(kappa=kappa, kappa_ext=kw.pop("kappa_ext", kappa), g_coupling=float(g),
                   gamma_x=gamma_x, **kw)


@dataclass(frozen=True)
class ScatterCoefficients:
    r_c: complex
    r_d: float
    phi_d: float

    def __post_init__(self):
        if abs(self.r_c) > 1 + NORM_TOL or self.r_d > 1 + NORM_TOL:
            raise ValueError("passive reflection requires |r| <= 1")

    @property
    def r_d_complex(self) -> complex:
        return self.r_d * np.exp(1j * self.phi_d)


@dataclass(frozen=True)
class SpinState:
    a: complex
    b: complex

    def __post_init__(self):
        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1) > NORM_TOL:
            raise ValueError("spin state must be normalized")

    @classmethod
    def up(cls) -> "SpinState":
        return cls(1.0, 0.0)

    @classmethod
    def down(cls) -> "SpinState":
        return cls(0.0, 1.0)


@dataclass(frozen=True)
class CrossOutput:
    amp_up: complex
    amp_down: complex
    norm: float


def beta_factor(c: CavityParams) -> float:
    if c.g_coupling == 0:
        return 0.0
    if c.kappa * c.gamma_x == 0:
        raise ValueError("Purcell factor undefined for kappa * gamma_x = 0")
    fp = 4 * c.g_coupling**2 / (c.kappa * c.gamma_x)
    return fp / (fp + 1)


def _raw_reflection(c: CavityParams, delta: float) -> tuple[complex, complex]:
    cav = c.kappa + 2j * c.delta_c
    if cav == 0:
        raise ZeroDivisionError("empty-cavity denominator vanishes")
    r_c = 1 - 2 * c.kappa_ext / cav
    if c.g_coupling == 0:
        return r_c, r_c
    dot = c.gamma_x + 2j * delta
    if dot == 0:
        raise ZeroDivisionError("dot denominator vanishes")
    r_d = 1 - 2 * c.kappa_ext / (cav + 4 * c.g_coupling**2 / dot)
    return r_c, r_d


def reflection_coefficients(c: CavityParams, delta: float) -> ScatterCoefficients:
    """Empty and loaded reflection, both rotated by the empty-cavity phase."""
    r_c, r_d = _raw_reflection(c, delta)
    if c.g_coupling == 0:
        return ScatterCoefficients(r_c=complex(abs(r_c)), r_d=float(abs(r_c)), phi_d=0.0)
    ref = np.exp(-1j * np.angle(r_c)) if abs(r_c) > 0 else 1.0
    r_d = complex(r_d * ref)
    phi = float(np.angle(r_d))
    if phi <= -np.pi + 1e-15:  # report the half-turn as +π
        phi = np.pi
    return ScatterCoefficients(r_c=complex(abs(r_c)), r_d=float(abs(r_d)), phi_d=phi)


def _cross_t(sc: ScatterCoefficients) -> complex:
    return (sc.r_c - sc.r_d_complex) / 2


def cross_amplitude(s: SpinState, sc: ScatterCoefficients) -> CrossOutput:
    t = _cross_t(sc)
    return CrossOutput(amp_up=complex(t * s.a), amp_down=complex(-t * s.b), norm=float(abs(t) ** 2))


def reflected_field(sc: ScatterCoefficients, spin: str) -> np.ndarray:
    """(E_H, E_V) of the reflected light for unit H input and a spin basis state."""
    if spin not in ("up", "down"):
        raise ValueError("spin must be 'up' or 'down'")
    sign = 1 if spin == "up" else -1
    return np.array([(sc.r_c + sc.r_d_complex) / 2, sign * _cross_t(sc)])


def stokes(field: np.ndarray) -> np.ndarray:
    """Normalized (S1, S2, S3) in the H/V basis; zero vector for no light."""
    eh, ev = field
    s0 = abs(eh) ** 2 + abs(ev) ** 2
    if s0 == 0:
        return np.zeros(3)
    c = np.conj(eh) * ev
    return np.array([abs(eh) ** 2 - abs(ev) ** 2, 2 * c.real, 2 * c.imag]) / s0


def poincare_trajectory(c: CavityParams, delta_sweep, spin: str) -> np.ndarray:
    """Stokes vectors of the reflected field along a laser-detuning sweep.

    The two spin states give trajectories related by (S2, S3) -> -(S2, S3).
    """
    return np.array([stokes(reflected_field(reflection_coefficients(c, d), spin))
                     for d in np.atleast_1d(delta_sweep)])
