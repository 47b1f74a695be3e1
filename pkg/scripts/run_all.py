"""Run every experiment for the shipped presets and write results to one directory.

    python scripts/run_all.py [--out results] [--skip-trajectories]
"""
import argparse
import sys
import time
from pathlib import Path

from spinmod import cli

JOBS = [
    ("mzi", ["--preset", "qd1"]),
    ("mzi", ["--preset", "qd1", "--set", "physical.b_field_mT=0"]),
    ("spectrum", ["--preset", "qd1_tuned", "--delta-scan=-1,-0.5,0,0.5,1", "--units", "gamma"]),
    ("hbt", ["--preset", "qd1"]),
    ("homodyne", ["--preset", "qd2"]),
    ("homodyne", ["--preset", "qd2", "--set", "homodyne.unlocked=true"]),
    ("trajectories", ["--preset", "qd2"]),
    ("trajectories", ["--preset", "qd1", "--set", "jitter.kind=none", "--set", "detector.jitter_ps=0"]),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--skip-trajectories", action="store_true")
    args = ap.parse_args()
    failed = 0
    for i, (cmd, extra) in enumerate(JOBS):
        if args.skip_trajectories and cmd == "trajectories":
            continue
        out = Path(args.out) / f"{i:02d}_{cmd}_{extra[1]}"
        t0 = time.perf_counter()
        code = cli.main([cmd, *extra, "--out", str(out)])
        print(f"{cmd:12s} {' '.join(extra):70s} exit {code}  {time.perf_counter() - t0:6.1f} s")
        failed += code != 0
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
