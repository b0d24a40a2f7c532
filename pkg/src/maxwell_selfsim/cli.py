"""Command line front end.

Usage::

    maxwell-selfsim <task> [--config FILE] [--preset NAME] [--d D] ... [--out DIR]

``<task>`` is one of ``spectral``, ``profile``, ``evolve``, ``moments`` and
``invert``.  Flags override the matching config keys; ``--set
section.key=value`` reaches any key.  Exit status is 0 on success, 1 on
usage or validation errors and 2 when a solver does not converge.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from .config import TASKS, ConfigError, RunConfig, parse_config

__all__ = ["main", "run", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_NONCONVERGENCE"]

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2

# flag name -> config key
_FLAGS = {
    "preset": "model.preset", "d": "model.d", "e": "model.e", "m": "model.m",
    "theta": "model.theta", "g": "model.g", "n_quad": "model.n_quad",
    "model_file": "model.file",
    "grid_n": "numerics.grid_n", "x_min": "numerics.x_min", "x_max": "numerics.x_max",
    "tol": "numerics.tol", "max_iter": "numerics.max_iter", "p": "numerics.p",
    "dt": "numerics.dt", "t_end": "numerics.t_end", "output_every": "numerics.output_every",
    "x_stride": "numerics.x_stride", "u0": "numerics.u0", "reference": "numerics.reference",
    "S": "numerics.S", "dim": "numerics.dim", "r_max": "numerics.r_max",
    "r_points": "numerics.r_points", "tail_window": "numerics.tail_window",
    "out": "output.dir", "seed": "seed",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors share exit status 1 with config errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="maxwell-selfsim",
                     description="Generalized Maxwell models: spectra, self-similar "
                                 "profiles, evolution, moments and inversion.")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", help="configuration file")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap on threads used by the numerical libraries")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. numerics.tol=1e-8")
    for flag in _FLAGS:
        name = "--" + flag.replace("_", "-")
        if flag == "reference":
            parser.add_argument(name, action="store_const", const="true", default=None,
                                help="compare with the p = 1 profile (evolve)")
        else:
            parser.add_argument(name, dest=flag, default=None, help=f"sets {_FLAGS[flag]}")
    return parser


def _overrides(args) -> dict:
    out = {"task": args.task}
    for flag, key in _FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            out[key] = val
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _limit_threads(n: int):
    # effective only before numpy is first imported
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def run(config: RunConfig) -> int:
    """Execute a validated configuration and return the exit status."""
    from .errors import NonConvergenceError
    from .runner import run_task

    try:
        run_task(config)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        config = parse_config(text, _overrides(args))
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None:
        config.threads = args.threads
        _limit_threads(args.threads)
    return run(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
