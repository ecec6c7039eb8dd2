"""``tidal-kdv`` command line: ``run <config> [--out DIR] [--quiet]`` and ``validate <config>``.

Exit status: 0 all assertions passed, 1 an assertion failed, 2 usage or
configuration error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .errors import ConfigurationError, DivergenceError, ParameterError, ResolutionError, TidalKdVError
from .experiments import ExperimentConfig, run, worker_count

EXIT_PASS = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse's usage text but our exit code
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tidal-kdv", description="Run KdV / tidal H_kappa experiments from a config file.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p_run = sub.add_parser("run", help="execute an experiment")
    p_run.add_argument("config", help="INI experiment description")
    p_run.add_argument("--out", metavar="DIR", help="output directory (overrides [experiment] output)")
    p_run.add_argument("--quiet", action="store_true", help="suppress the per-assertion summary")
    p_val = sub.add_parser("validate", help="check a config file without running it")
    p_val.add_argument("config")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.from_file(args.config)
        worker_count()
    except ConfigurationError as exc:
        print(f"tidal-kdv: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.experiment})")
        return EXIT_PASS

    try:
        manifest = run(cfg, args.out)
    except DivergenceError as exc:
        print(f"tidal-kdv: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ConfigurationError, ParameterError, ResolutionError) as exc:
        # the configuration parsed but cannot be run as stated (grid too coarse, dt unstable, ...)
        print(f"tidal-kdv: invalid configuration: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TidalKdVError as exc:
        print(f"tidal-kdv: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    if not args.quiet:
        for a in manifest.assertions:
            mark = "PASS" if a.passed else "FAIL"
            print(f"{mark} {a.name}: {a.value:.6g} {a.comparison} {a.threshold:g}")
        print(f"status: {manifest.status}")
    return EXIT_PASS if manifest.passed else EXIT_ASSERTION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
