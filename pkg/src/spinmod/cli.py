"""Command-line runner: ``spinmod {mzi,spectrum,hbt,homodyne,trajectories}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import experiments
from .config import PRESETS, ConfigError, build, load_pairs
from .qsys import SteadyStateError
from .timetags import TimeTagFormatError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
RUNNERS = {
    "mzi": experiments.run_mzi,
    "spectrum": experiments.run_spectrum,
    "hbt": experiments.run_hbt,
    "homodyne": experiments.run_homodyne,
    "trajectories": experiments.run_trajectories,
}

log = logging.getLogger("spinmod")


def _float_list(text: str) -> str:
    # validated later by the config coercion; kept as text so the echo is exact
    return text


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinmod", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(RUNNERS))
    ap.add_argument("--config", help="key = value file, or a result file to re-run")
    ap.add_argument("--preset", choices=[p for p in PRESETS if p != "custom"])
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--format", choices=["csv", "json"])
    ap.add_argument("--units", choices=["si", "gamma"])
    ap.add_argument("--seed", type=int)
    ap.add_argument("--phi-lo", type=_float_list, help="comma-separated LO phases, radians")
    ap.add_argument("--delta-scan", type=_float_list, help="comma-separated detunings in units of Γ")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve(args) -> "experiments.RunConfig":
    pairs = load_pairs(args.config) if args.config else {}
    cfg = build(pairs, args.preset)
    flags = {
        "output.dir": args.out,
        "output.format": args.format,
        "output.units": args.units,
        "trajectories.seed": None if args.seed is None else str(args.seed),
        "homodyne.phi_lo": args.phi_lo,
        "grids.delta_over_gamma": args.delta_scan,
    }
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        flags[key.strip()] = value.strip()
    for k, v in flags.items():
        if v is not None:
            cfg.set(k, v)
    if cfg.output.format not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    if cfg.output.units not in ("si", "gamma"):
        raise ConfigError("output.units must be si or gamma")
    return cfg


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve(args)
        result = RUNNERS[args.command](cfg)
        table = result[0] if isinstance(result, tuple) else result
        path = table.write(cfg.output.dir, args.command, cfg.output.format)
        log.info("wrote %s", path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, TimeTagFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, SteadyStateError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
