"""Throughput of the trajectory engine on the QD1 parameters.

    SPINMOD_THREADS=1 python scripts/bench_trajectories.py [--n 512] [--duration 2000]
"""
import argparse
import time

from spinmod import trajectories as tr
from spinmod.config import build
from spinmod.presets import trion_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--duration", type=float, default=2000.0)
    ap.add_argument("--preset", default="qd1")
    args = ap.parse_args()
    p = trion_params(build({}, args.preset))
    cfg = tr.TrajectoryConfig(args.n, args.duration, seed=1)
    dt, n_steps = tr._resolve_dt(p, cfg)
    t0 = time.perf_counter()
    s = tr.simulate_stream(p, cfg)
    wall = time.perf_counter() - t0
    steps = args.n * n_steps
    print(f"threads {tr.thread_count()}  dt {dt * 1e3:.3f} ps  {steps:.3g} trajectory-steps in {wall:.2f} s "
          f"({wall / steps * 1e9:.1f} ns/step)  clicks {s.channel_a.size + s.channel_b.size}")


if __name__ == "__main__":
    main()
