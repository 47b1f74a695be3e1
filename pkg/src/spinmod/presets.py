"""Parameter sets for the two dots and the derived model parameters.

Precession frequencies are the fitted values; the g-factors stored here are
those frequencies divided by μ_B·B at the quoted field, so a different field
rescales the precession linearly.
"""
from __future__ import annotations

import numpy as np

from .config import ConfigError, RunConfig
from .dynamics import HomodyneConfig
from .ensemble import DetectorModel, JitterModel, required_nodes
from .trion import (BOHR_GHZ_PER_T, UEV_TO_RAD_PER_NS, MarkovianSpin, QuasistaticSpin, TrionParams,
                    calibrate_spin_rate, mhz_to_rad, rabi_from_power)

QD1_LARMOR_MHZ = 590.0
QD1_FIELD_MT = 108.0
QD2_LARMOR_MHZ = 159.0
QD2_FIELD_MT = 86.0


def g_from_fit(larmor_mhz: float, b_mt: float) -> float:
    return larmor_mhz * 1e-3 / (BOHR_GHZ_PER_T * b_mt * 1e-3)


def qd1() -> RunConfig:
    c = RunConfig(preset="qd1")
    c.physical.t1_ns = 0.46
    c.physical.b_field_mT = QD1_FIELD_MT
    c.physical.g_b = g_from_fit(QD1_LARMOR_MHZ, QD1_FIELD_MT)
    c.physical.p_over_psat = 0.02
    c.model.t2star_ns = 2.7
    c.model.calibration_b_mT = QD1_FIELD_MT
    c.jitter.kind = "gaussian_detuning"
    c.jitter.fwhm_uev = 5.0
    c.jitter.n_samples = 41
    c.detector.jitter_ps = 64.0
    c.detector.bin_ps = 64.0
    c.trajectories.n = 6144
    c.trajectories.duration_ns = 2000.0
    c.trajectories.tau_max_ns = 5.0
    return c


def qd1_tuned() -> RunConfig:
    """QD1 with the precession set to 0.3Γ so the spectral sidebands sit at ±0.3Γ."""
    c = qd1()
    c.preset = "qd1_tuned"
    c.model.larmor_over_gamma = 0.3
    c.jitter.kind = "none"
    c.grids.delta_over_gamma = [0.0]
    return c


def qd2() -> RunConfig:
    c = RunConfig(preset="qd2")
    c.physical.t1_ns = 0.46
    c.physical.b_field_mT = QD2_FIELD_MT
    c.physical.g_b = g_from_fit(QD2_LARMOR_MHZ, QD2_FIELD_MT)
    c.physical.p_over_psat = 0.1
    c.model.t2star_ns = 12.5
    c.model.calibration_b_mT = QD2_FIELD_MT
    c.homodyne.lo_over_rsf = 10.0
    c.homodyne.phi_lo = [0.0, float(np.pi / 2)]
    c.detector.jitter_ps = 300.0
    c.detector.bin_ps = 256.0
    c.trajectories.detection = "homodyne"
    c.trajectories.n = 256
    c.trajectories.duration_ns = 1000.0
    c.trajectories.tau_max_ns = 40.0
    return c


def preset_config(name: str) -> RunConfig:
    table = {"qd1": qd1, "qd2": qd2, "qd1_tuned": qd1_tuned, "custom": RunConfig}
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}")
    return table[name]()


def _larmor(c: RunConfig, b_mt: float, gamma: float, g: float) -> float:
    """Precession angular frequency 2ω in rad/ns for g-factor ``g`` at ``b_mt``."""
    m = c.model
    if m.larmor_over_gamma is not None:
        return m.larmor_over_gamma * gamma
    if m.larmor_mhz is not None:
        ref = m.calibration_b_mT or c.physical.b_field_mT
        scale = b_mt / ref if ref else 1.0
        return mhz_to_rad(m.larmor_mhz) * scale
    return 2 * np.pi * BOHR_GHZ_PER_T * abs(g) * b_mt * 1e-3


def _base_params(c: RunConfig, b_mt: float) -> TrionParams:
    ph, m = c.physical, c.model
    if ph.t1_ns <= 0:
        raise ConfigError("physical.t1_ns must be positive")
    gamma = 1.0 / ph.t1_ns
    wb = 0.5 * _larmor(c, b_mt, gamma, ph.g_b)
    wh = wb if ph.g_h is None else 0.5 * _larmor(c, b_mt, gamma, ph.g_h)
    return TrionParams(
        gamma=gamma,
        omega_b=wb,
        omega_h=wh,
        delta=m.delta_uev * UEV_TO_RAD_PER_NS,
        omega_rabi=rabi_from_power(gamma, ph.p_over_psat),
        gamma_opt_deph=m.gamma_opt_deph_over_gamma * gamma,
    )


def trion_params(c: RunConfig) -> TrionParams:
    """Model parameters with the spin dephasing resolved.

    With a Markovian model and a T2*, the intrinsic rate is calibrated at
    ``calibration_b_mT`` (where T2* was measured) and reused at the run field.
    """
    m = c.model
    p = _base_params(c, c.physical.b_field_mT)
    if m.dephasing == "overhauser":
        if m.t2star_ns is None:
            raise ConfigError("overhauser dephasing needs model.t2star_ns")
        return p.replace(spin_dephasing=QuasistaticSpin(float(np.sqrt(2) / m.t2star_ns)))
    if m.dephasing != "markovian":
        raise ConfigError(f"unknown dephasing model {m.dephasing!r}")
    if m.spin_rate is not None:
        return p.replace(spin_dephasing=MarkovianSpin(m.spin_rate))
    if m.t2star_ns is None:
        return p
    ref_b = m.calibration_b_mT if m.calibration_b_mT is not None else c.physical.b_field_mT
    ref = _base_params(c, ref_b)
    if ref.omega_b == 0:
        raise ConfigError("T2* calibration needs a nonzero field")
    rate = calibrate_spin_rate(ref, m.t2star_ns).spin_rate
    return p.replace(spin_dephasing=MarkovianSpin(rate))


def jitter_model(c: RunConfig, gamma: float) -> JitterModel | None:
    j = c.jitter
    if j.kind == "none" or j.fwhm_uev == 0:
        return None
    fwhm = j.fwhm_uev * UEV_TO_RAD_PER_NS
    if j.kind == "gaussian_detuning" and j.n_samples < required_nodes(fwhm, gamma):
        raise ConfigError(f"jitter.n_samples must be at least {required_nodes(fwhm, gamma)}")
    return JitterModel(j.kind, fwhm, j.n_samples)


def detector_model(c: RunConfig) -> DetectorModel:
    d = c.detector
    return DetectorModel(jitter_sigma=d.jitter_ps * 1e-3, efficiency=d.efficiency, bin_width=d.bin_ps * 1e-3)


def homodyne_configs(c: RunConfig, p: TrionParams) -> dict[str, HomodyneConfig]:
    h = c.homodyne
    out = {}
    for phi in h.phi_lo:
        out[f"phi_{phi:.4f}"] = HomodyneConfig.from_intensity_ratio(p, h.lo_over_rsf, phi_lo=phi,
                                                                   phase_noise_sigma=h.phase_noise)
    if h.unlocked:
        out["unlocked"] = HomodyneConfig.from_intensity_ratio(p, h.lo_over_rsf, unlocked=True)
    return out
