"""``uosc`` command line entry point.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures (solver non-convergence, degenerate draws, undefined quantities).
"""
from __future__ import annotations

import argparse
import logging
import sys

from ..exceptions import ComputationError, ConvergenceError, GenerationError, ParameterError
from .config import EXPERIMENTS, build_config, load_config_file, parse_overrides
from .experiments import RUNNERS

log = logging.getLogger("uosc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def make_parser():
    parser = _Parser(prog="uosc", description="Subspace clustering experiments and theorem checks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", help="base seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--trials", help="trials per grid cell")
        p.add_argument("--algorithms", help="comma list of MFC, IP_L1, IP_L2, TSC")
        p.add_argument("--m", help="cluster counts, e.g. 2,4 or 2:10")
        p.add_argument("--s", help="intersection dimensions")
        p.add_argument("--kappa", help="kappa values")
        p.add_argument("--topk", help="entries kept per adjacency column")
        p.add_argument("--M1", dest="M1", help="ambient dimensions")
        p.add_argument("--r", help="subspace dimension")
        p.add_argument("--n", help="points per cluster")
        p.add_argument("--normalize", help="1 to unit-normalize columns, 0 to keep raw scale")
        p.add_argument("--theorems", help="verify only: comma list of T1..T7")
        p.add_argument("--p", help="verify only: norm parameter 1 or 2")
        p.add_argument("--delta", help="verify only: failure probability for the bounds")
    return parser


OVERRIDE_KEYS = ("seed", "out", "trials", "algorithms", "m", "s", "kappa", "topk", "M1",
                 "r", "n", "normalize", "theorems", "p", "delta")


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        file_values = load_config_file(args.config) if args.config else {}
        raw = {k: getattr(args, k) for k in OVERRIDE_KEYS if getattr(args, k) is not None}
        cfg = build_config(args.experiment, file_values, parse_overrides(raw))
    except ParameterError as exc:
        print(f"uosc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s with %s", cfg.experiment, cfg)
    try:
        result = RUNNERS[cfg.experiment](cfg, write=True)
    except (ConvergenceError, ComputationError, GenerationError, FloatingPointError) as exc:
        print(f"uosc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ParameterError as exc:
        print(f"uosc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"uosc: cannot write output: {exc}", file=sys.stderr)
        return 1
    if cfg.experiment == "verify":
        for row in result["verify_summary"]:
            print("{theorem_id}: instances={instances} holds={holds} "
                  "checked={checked} violations={violations}".format(**row))
    print(f"wrote results to {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
