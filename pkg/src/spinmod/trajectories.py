"""Monte Carlo wavefunction unraveling of the trion master equation.

Each trajectory evolves under the non-Hermitian H_eff on a fixed grid of step
``dt``.  The jump probability in a step is 1 - ||ψ(t+dt)||²/||ψ(t)||², with
the no-jump propagator exp(-i H_eff dt) applied exactly.  Instead of one
uniform draw per step, one draw r per jump is compared against the running
norm: the first step where ||ψ̃||² < r is the jump step.  Both schemes give
the same distribution of jump steps; the second lets many steps be advanced
with a single matrix product.

Detection channels A and B split the V port 50:50 (HBT) or mix it with a
classical LO at a balanced splitter (homodyne).  The remaining collapse
operators are unobserved.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import qsys
from .dynamics import HomodyneConfig, lo_reference_phase, steady_state
from .ensemble import DetectorModel
from .timetags import (PS_PER_NS, CoincidenceHistogram, TimeTagStream, correlate,  # noqa: F401
                       correlate_all_pairs, read_stream, stream_statistics, write_stream)
from .trion import TrionParams, build_hamiltonian, h_port_field_op, spin_dephasing_ops, v_port_field_op

DT_FACTOR = 0.01
CHUNK = 256
MAX_EIG_COND = 1e8
THREADS_ENV = "SPINMOD_THREADS"


@dataclass(frozen=True)
class TrajectoryConfig:
    n_trajectories: int
    duration: float  # ns per trajectory
    dt: float | None = None  # ns; defaults to the largest allowed step
    seed: int = 0
    detection: str = "hbt"
    homodyne: HomodyneConfig | None = None
    block_size: int = 512

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be at least 1")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.detection not in ("hbt", "homodyne"):
            raise ValueError("detection must be 'hbt' or 'homodyne'")
        if self.detection == "homodyne" and self.homodyne is None:
            raise ValueError("homodyne detection needs a HomodyneConfig")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")

    @property
    def n_blocks(self) -> int:
        return -(-self.n_trajectories // self.block_size)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def max_dt(p: TrionParams, cfg: TrajectoryConfig) -> float:
    rate = p.max_rate()
    if cfg.detection == "homodyne":
        rate = max(rate, cfg.homodyne.alpha**2)
    return DT_FACTOR / rate


def unobserved_ops(p: TrionParams) -> list[np.ndarray]:
    """Collapse operators besides the V port, chosen to unravel without heavy tails.

    Pure optical dephasing enters as the unitary √(γ'/2)(P_e - P_g) instead of
    the projector √(2γ')P_e.  Both give the same Liouvillian, but the
    projector puts rare trajectories fully into the trion manifold, which makes
    trajectory averages converge slowly.
    """
    ops = [h_port_field_op(p)] if p.gamma > 0 else []
    if p.gamma_opt_deph > 0:
        z = np.diag([-1.0, -1.0, 1.0, 1.0]).astype(complex)
        ops.append(np.sqrt(p.gamma_opt_deph / 2) * z)
    ops.extend(spin_dephasing_ops(p.spin_rate))
    return ops


class _Engine:
    """Batched no-jump propagation plus jump selection for one parameter set."""

    def __init__(self, p: TrionParams, cfg: TrajectoryConfig, dt: float):
        self.dt = dt
        E = v_port_field_op(p)
        self.E = E
        others = unobserved_ops(p)
        self.others = np.array(others) if others else np.zeros((0, 4, 4), complex)
        decay = E.conj().T @ E + sum((L.conj().T @ L for L in others), np.zeros((4, 4)))
        self.homodyne = cfg.detection == "homodyne"
        if self.homodyne:
            self.alpha = cfg.homodyne.alpha
            self.ref = lo_reference_phase(p)
            decay = decay + self.alpha**2 * np.eye(4)
        H_eff = build_hamiltonian(p) - 0.5j * decay
        mu, V = np.linalg.eig(H_eff)
        if np.linalg.cond(V) > MAX_EIG_COND:
            raise ValueError("no-jump generator is too close to defective to diagonalize")
        self.V, self.Vinv = V, np.linalg.inv(V)
        k = np.arange(1, CHUNK + 1)
        # eigenmode amplitudes after 1..CHUNK steps
        self.lam = np.exp(-1j * np.outer(k, mu) * dt)
        # ||ψ̃_k||² = Σ_ij conj(c_i) c_j conj(λ_i^k) λ_j^k (V†V)_ij is linear in the
        # 16 real numbers |c_i|², Re and Im of conj(c_i) c_j (i < j)
        S = V.conj().T @ V
        iu, ju = np.triu_indices(4, 1)
        self.pairs = (iu, ju)
        diag = (np.abs(self.lam) ** 2 * S.diagonal().real).T
        y = np.conj(self.lam[:, iu]) * self.lam[:, ju] * S[iu, ju]
        self.coef = np.ascontiguousarray(np.vstack([diag, 2 * y.real.T, -2 * y.imag.T]))

    def channel_amplitudes(self, psi: np.ndarray, beta: np.ndarray | None) -> np.ndarray:
        """L_c ψ for all channels, shape (n_channels, m, 4); A and B first."""
        Epsi = psi @ self.E.T
        if self.homodyne:
            lo = beta[:, None] * psi
            a, b = (lo + Epsi) / np.sqrt(2), (lo - Epsi) / np.sqrt(2)
        else:
            a = b = Epsi / np.sqrt(2)
        rest = np.einsum("cij,mj->cmi", self.others, psi)
        return np.concatenate([a[None], b[None], rest], axis=0)

    def run(self, psi, r, step, until, rng, beta=None, tags=None):
        """Advance every row to step ``until``; jumps on channels 0/1 go to ``tags``."""
        active = np.flatnonzero(step < until)
        iu, ju = self.pairs
        k = np.arange(CHUNK)
        while active.size:
            c = psi[active] @ self.Vinv.T
            x = np.conj(c[:, iu]) * c[:, ju]
            feats = np.hstack([c.real**2 + c.imag**2, x.real, x.imag])
            n2 = feats @ self.coef
            limit = np.minimum(CHUNK, until - step[active])
            below = (n2 < r[active, None]) & (k[None, :] < limit[:, None])
            jumped = below.any(axis=1)
            adv = np.where(jumped, below.argmax(axis=1), limit - 1)
            nn = n2[np.arange(active.size), adv]
            new = (self.lam[adv] * c) @ self.V.T
            r[active] = r[active] / nn
            psi[active] = new / np.sqrt(nn)[:, None]
            step[active] += adv + 1
            if jumped.any():
                self._jump(psi, r, step, active[jumped], rng, beta, tags)
            active = active[step[active] < until]

    def _jump(self, psi, r, step, j, rng, beta, tags):
        amps = self.channel_amplitudes(psi[j], None if beta is None else beta[j])
        w = np.einsum("cmi,cmi->mc", amps.real, amps.real) + np.einsum("cmi,cmi->mc", amps.imag, amps.imag)
        cum = np.cumsum(w, axis=1)
        u = rng.random(j.size) * cum[:, -1]
        c = np.minimum((cum < u[:, None]).sum(axis=1), w.shape[1] - 1)
        out = amps[c, np.arange(j.size)]
        psi[j] = out / np.linalg.norm(out, axis=1)[:, None]
        r[j] = rng.random(j.size)
        if tags is not None:
            hit = c < 2
            tags.append((j[hit], step[j[hit]], c[hit]))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _sample_initial(rho: np.ndarray, m: int, rng) -> np.ndarray:
    """Pure states whose mixture is ``rho``."""
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0, None)
    idx = rng.choice(w.size, size=m, p=w / w.sum())
    return v[:, idx].T.astype(complex)


def _lo_phases(h: HomodyneConfig, m: int, rng) -> np.ndarray:
    if h.unlocked:
        return rng.uniform(0, 2 * np.pi, m)
    return h.phi_lo + h.phase_noise_sigma * rng.standard_normal(m)


def _resolve_dt(p: TrionParams, cfg: TrajectoryConfig) -> tuple[float, int]:
    limit = max_dt(p, cfg)
    dt = limit if cfg.dt is None else cfg.dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt = {dt:.3g} ns too coarse; must not exceed {limit:.3g} ns")
    n_steps = int(np.ceil(cfg.duration / dt - 1e-9))
    return cfg.duration / n_steps, n_steps


def _simulate_block(p, cfg, det, engine, n_steps, block):
    rng = _block_rng(cfg.seed, block)
    first = block * cfg.block_size
    m = min(cfg.block_size, cfg.n_trajectories - first)
    psi = _sample_initial(steady_state(p), m, rng)
    beta = None
    if cfg.detection == "homodyne":
        beta = cfg.homodyne.alpha * np.exp(1j * (_lo_phases(cfg.homodyne, m, rng) + engine.ref))
    r = rng.random(m)
    step = np.zeros(m, dtype=np.int64)
    tags = []
    engine.run(psi, r, step, n_steps, rng, beta, tags)
    if tags:
        rows, steps, chans = (np.concatenate(x) for x in zip(*tags))
    else:
        rows = steps = chans = np.zeros(0, dtype=np.int64)
    dur_ps = int(round(cfg.duration * PS_PER_NS))
    t = np.rint(steps * engine.dt * PS_PER_NS).astype(np.int64) + (first + rows) * dur_ps
    keep = rng.random(t.size) < det.efficiency
    t, chans = t[keep], chans[keep]
    if det.jitter_sigma > 0:
        t = t + np.rint(rng.normal(0.0, det.jitter_sigma * PS_PER_NS, t.size)).astype(np.int64)
    return t[chans == 0], t[chans == 1]


def _merge(parts, total_ps: int) -> np.ndarray:
    t = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    t = t[(t >= 0) & (t <= total_ps)]
    # coincident tags on one detector register once
    return np.unique(t)


def simulate_stream(p: TrionParams, cfg: TrajectoryConfig, det: DetectorModel | None = None) -> TimeTagStream:
    """Concatenate independent stationary trajectories into one tag stream.

    Trajectory k occupies [k·duration, (k+1)·duration); each starts from a
    pure state drawn from the steady-state mixture.  Blocks of trajectories
    draw from RNG streams keyed by (seed, block index), so the stream does not
    depend on the thread count.
    """
    det = det or DetectorModel()
    dt, n_steps = _resolve_dt(p, cfg)
    engine = _Engine(p, cfg, dt)

    def work(block):
        return _simulate_block(p, cfg, det, engine, n_steps, block)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(work, range(cfg.n_blocks)))
    total_ps = int(round(cfg.duration * PS_PER_NS)) * cfg.n_trajectories
    a = _merge([x[0] for x in results], total_ps)
    b = _merge([x[1] for x in results], total_ps)
    return TimeTagStream(a, b, total_ps, cfg.seed)


@dataclass(frozen=True)
class StateEstimate:
    times: np.ndarray
    mean: np.ndarray  # (n_times, 4, 4)
    stderr: np.ndarray  # elementwise standard error of real and imaginary parts, complex-packed


def average_state(p: TrionParams, psi0: np.ndarray, times, cfg: TrajectoryConfig) -> StateEstimate:
    """Trajectory average of |ψ⟩⟨ψ| at the given times, starting from ``psi0``."""
    dt, _ = _resolve_dt(p, TrajectoryConfig(1, max(times), cfg.dt, cfg.seed, cfg.detection, cfg.homodyne))
    targets = np.rint(np.asarray(times) / dt).astype(np.int64)
    if np.any(np.diff(targets) <= 0) or targets[0] < 0:
        raise ValueError("checkpoint times must be increasing and resolvable on the step grid")
    engine = _Engine(p, cfg, dt)
    psi0 = np.asarray(psi0, complex) / np.linalg.norm(psi0)
    s1 = np.zeros((targets.size, 4, 4), complex)
    s2r = np.zeros((targets.size, 4, 4))
    s2i = np.zeros((targets.size, 4, 4))

    def work(block):
        rng = _block_rng(cfg.seed, block)
        m = min(cfg.block_size, cfg.n_trajectories - block * cfg.block_size)
        psi = np.tile(psi0, (m, 1))
        beta = None
        if cfg.detection == "homodyne":
            beta = cfg.homodyne.alpha * np.exp(1j * (_lo_phases(cfg.homodyne, m, rng) + engine.ref))
        r = rng.random(m)
        step = np.zeros(m, dtype=np.int64)
        out = []
        for until in targets:
            engine.run(psi, r, step, until, rng, beta)
            rho = psi[:, :, None] * psi.conj()[:, None, :]
            out.append((rho.sum(0), (rho.real**2).sum(0), (rho.imag**2).sum(0)))
        return out

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        for out in pool.map(work, range(cfg.n_blocks)):
            for i, (a, b, c) in enumerate(out):
                s1[i] += a
                s2r[i] += b
                s2i[i] += c
    n = cfg.n_trajectories
    mean = s1 / n
    var_r = np.maximum(s2r / n - mean.real**2, 0) / max(n - 1, 1)
    var_i = np.maximum(s2i / n - mean.imag**2, 0) / max(n - 1, 1)
    return StateEstimate(targets * dt, mean, np.sqrt(var_r) + 1j * np.sqrt(var_i))


def expected_channel_rate(p: TrionParams, cfg: TrajectoryConfig, det: DetectorModel | None = None) -> float:
    """Mean click rate per channel (1/ns) from the steady state."""
    det = det or DetectorModel()
    E = v_port_field_op(p)
    I = float(qsys.expect(E.conj().T @ E, steady_state(p)).real)
    if cfg.detection == "homodyne":
        I = I + cfg.homodyne.alpha**2
    return det.efficiency * I / 2
