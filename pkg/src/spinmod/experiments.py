"""Scenario pipelines behind the command-line subcommands.

Each ``run_*`` takes a resolved :class:`RunConfig` and returns a
:class:`ResultTable` whose metadata echoes the full configuration.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import __version__
from . import dynamics as dyn
from . import ensemble as ens
from .config import RunConfig
from .presets import detector_model, homodyne_configs, jitter_model, trion_params
from .timetags import CoincidenceHistogram, correlate, stream_statistics, write_stream
from .trajectories import TrajectoryConfig, simulate_stream
from .trion import TrionParams


@dataclass
class ResultTable:
    columns: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = {len(v) for v in self.columns.values()}
        if len(n) > 1:
            raise ValueError("columns must have equal length")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def to_csv(self) -> str:
        lines = [f"#@ {k} = {v}" for k, v in self.metadata["config"].items()]
        for k, v in self.metadata.items():
            if k != "config":
                lines.append(f"# {k}: {json.dumps(v, sort_keys=True)}")
        lines.append(",".join(self.columns))
        cols = [np.asarray(c, dtype=float) for c in self.columns.values()]
        for i in range(self.n_rows):
            lines.append(",".join(repr(float(c[i])) for c in cols))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        body = {"metadata": self.metadata,
                "columns": {k: [float(x) for x in np.asarray(v, dtype=float)] for k, v in self.columns.items()}}
        return json.dumps(body, indent=1, sort_keys=False) + "\n"

    def write(self, directory, name: str, fmt: str) -> Path:
        path = Path(directory) / f"{name}.{fmt}"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv() if fmt == "csv" else self.to_json())
        return path


def _metadata(cfg: RunConfig, subcommand: str, **summary) -> dict:
    return {
        "config": cfg.to_flat(with_output_dir=False),
        "tool": f"spinmod {__version__}",
        "subcommand": subcommand,
        "seed": cfg.trajectories.seed,
        "summary": {k: _plain(v) for k, v in summary.items()},
    }


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _tau(cfg: RunConfig, p: TrionParams) -> np.ndarray:
    return dyn.default_tau_grid(p, cfg.grids.n_points, cfg.grids.tau_max_ns)


def run_mzi(cfg: RunConfig) -> ResultTable:
    p = trion_params(cfg)
    tau = _tau(cfg, p)
    s = ens.average(p, jitter_model(cfg, p.gamma), "g1", tau)
    vis = dyn.visibility(s, cfg.model.v0)
    return ResultTable({"tau_ns": tau, "g1_abs": np.abs(s.values), "visibility": vis},
                       _metadata(cfg, "mzi", envelope_time_ns=dyn.envelope_time(p)))


def _freq_column(omega: np.ndarray, gamma: float, units: str) -> tuple[str, np.ndarray]:
    if units == "gamma":
        return "omega_over_gamma", omega / gamma
    return "freq_ghz", omega / (2 * np.pi)


def run_spectrum(cfg: RunConfig) -> ResultTable:
    p = trion_params(cfg)
    tau = _tau(cfg, p)
    j = jitter_model(cfg, p.gamma)
    kw = dict(omega_max=cfg.grids.omega_max_over_gamma * p.gamma, pad_factor=cfg.grids.pad)
    blocks, deltas, omegas, intensities = [], [], [], []
    for d in cfg.grids.delta_over_gamma:
        q = p.replace(delta=p.delta + d * p.gamma)
        s = ens.average(q, j, "spectrum", tau, **kw)
        blocks.append(s.values)
        omegas.append(s.omega)
        deltas.append(np.full(s.omega.size, d))
        intensities.append(dyn.v_intensity(q))
    name, freq = _freq_column(np.concatenate(omegas), p.gamma, cfg.output.units)
    cols = {"delta_over_gamma": np.concatenate(deltas), name: freq, "s_of_omega": np.concatenate(blocks)}
    return ResultTable(cols, _metadata(cfg, "spectrum", v_intensity=intensities,
                                       freq_bin=float(freq[1] - freq[0])))


def run_hbt(cfg: RunConfig) -> ResultTable:
    p = trion_params(cfg)
    det = detector_model(cfg)
    tau = _tau(cfg, p)
    ideal = ens.average(p, None, "g2", tau)
    jittered = ens.convolve_detector_jitter(ideal, det)
    j = jitter_model(cfg, p.gamma)
    ensemble = ens.convolve_detector_jitter(ens.average(p, j, "g2", tau), det) if j else jittered
    cols = {"tau_ns": tau, "g2": ideal.values, "g2_jittered": jittered.values, "g2_ensemble": ensemble.values}
    return ResultTable(cols, _metadata(cfg, "hbt", g2_zero=ideal.values[0],
                                       g2_jittered_zero=jittered.values[0]))


def run_homodyne(cfg: RunConfig) -> ResultTable:
    p = trion_params(cfg)
    det = detector_model(cfg)
    tau = _tau(cfg, p)
    j = jitter_model(cfg, p.gamma)
    cols = {"tau_ns": tau}
    for tag, h in homodyne_configs(cfg, p).items():
        s = ens.average(p, j, "g2_hom", tau, homodyne=h)
        cols[f"g2_hom_{tag}"] = s.values
        cols[f"g2_hom_{tag}_jittered"] = ens.convolve_detector_jitter(s, det).values
    return ResultTable(cols, _metadata(cfg, "homodyne"))


def trajectory_config(cfg: RunConfig, p: TrionParams) -> TrajectoryConfig:
    t = cfg.trajectories
    h = None
    if t.detection == "homodyne":
        hc = cfg.homodyne
        h = dyn.HomodyneConfig.from_intensity_ratio(p, hc.lo_over_rsf, phi_lo=hc.phi_lo[0],
                                                    phase_noise_sigma=hc.phase_noise, unlocked=hc.unlocked)
    return TrajectoryConfig(t.n, t.duration_ns, seed=t.seed, detection=t.detection, homodyne=h,
                            block_size=t.block_size)


def expected_histogram(p: TrionParams, tcfg: TrajectoryConfig, det: ens.DetectorModel,
                       lags: np.ndarray, bin_width: float) -> np.ndarray:
    """Regression prediction of the normalized start-stop histogram.

    Two-sided cross-correlation of the detection channels, averaged over the
    LO phase distribution, convolved with the detector jitter and averaged
    over each bin.
    """
    tau_max = float(np.max(np.abs(lags))) + bin_width + 8 * np.sqrt(2) * det.jitter_sigma
    step = min(dyn.max_tau_step(p), bin_width / 16, det.jitter_sigma / 2 if det.jitter_sigma else np.inf)
    n = int(np.ceil(tau_max / step)) + 1
    grid = np.arange(n) * step
    if tcfg.detection == "hbt":
        E = dyn.v_port_field_op(p) / np.sqrt(2)
        ports = [((E, E), 1.0)]
    else:
        phis, w = dyn._phase_nodes(tcfg.homodyne)
        ports = [(dyn.homodyne_ports(p, tcfg.homodyne.alpha, phi), wk) for phi, wk in zip(phis, w)]
    pos = np.zeros(n)
    neg = np.zeros(n)
    ia = ib = 0.0
    for (A, B), wk in ports:
        g_ab, a, b = dyn.raw_cross_g2(p, A, B, grid)
        g_ba, _, _ = dyn.raw_cross_g2(p, B, A, grid)
        pos += wk * g_ab
        neg += wk * g_ba
        ia += wk * a
        ib += wk * b
    full = np.concatenate([neg[:0:-1], pos]) / (ia * ib)
    x = np.concatenate([-grid[:0:-1], grid])
    if det.jitter_sigma > 0:
        full = gaussian_filter1d(full, np.sqrt(2) * det.jitter_sigma / step, mode="nearest", truncate=8.0)
    u = np.linspace(-0.5, 0.5, 33)
    return np.array([np.mean(np.interp(l + u * bin_width, x, full)) for l in lags])


def run_trajectories(cfg: RunConfig) -> tuple[ResultTable, Path]:
    p = trion_params(cfg)
    det = detector_model(cfg)
    tcfg = trajectory_config(cfg, p)
    stream = simulate_stream(p, tcfg, det)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    tag_path = out / "trajectories.ttag"
    write_stream(stream, tag_path)
    hist: CoincidenceHistogram = correlate(stream, det.bin_width, cfg.trajectories.tau_max_ns)
    model = expected_histogram(p, tcfg, det, hist.lags, hist.bin_width)
    sigma = np.sqrt(np.maximum(model * hist.normalization, 1.0)) / hist.normalization
    cols = {"tau_ns": hist.lags, "counts": hist.counts, "g2_measured": hist.normalized,
            "g2_sigma": sigma, "g2_regression": model}
    within = float(np.mean(np.abs(hist.normalized - model) <= 3 * sigma))
    stats = stream_statistics(stream, cfg.trajectories.tau_max_ns)
    table = ResultTable(cols, _metadata(cfg, "trajectories", fraction_within_3sigma=within,
                                        tag_file=tag_path.name, **stats))
    return table, tag_path
