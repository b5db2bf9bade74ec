"""
fuzzy-decomp - decompose finite reversible Markov chains with fuzzy partitions,
estimate their Poincare / log-Sobolev constants and verify the decomposition bounds.

Usage: python app.py <validate|decompose|constants|bound|glued|mixing> [options]
"""

import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from config import RunConfig, config
from core.operations import COMMANDS, EXIT_FAILURE, EXIT_IO
from modules.errors import ArtifactError, FuzzyDecompError
from utils.formatters import format_error_message
from utils.validators import parse_tolerance_overrides

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per operation."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=str, help="output file (directory for 'glued'); default stdout")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--restarts", type=int, help="optimizer restarts")
    common.add_argument("--max-iter", type=int, help="optimizer iterations per restart")
    common.add_argument("--threads", type=int, default=1, help="worker threads for restarts")
    common.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE",
                        help="override a tolerance, e.g. --tol reversibility=1e-9")
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for INFO, -vv for DEBUG logging on stderr")

    parser = argparse.ArgumentParser(prog="fuzzy-decomp", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.app.version}")
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", parents=[common], help="validate chain/partition/couplings")
    validate.add_argument("--chain", required=True)
    validate.add_argument("--partition")
    validate.add_argument("--couplings")

    decompose = sub.add_parser("decompose", parents=[common], help="projection and restriction chains")
    decompose.add_argument("--chain", required=True)
    decompose.add_argument("--partition", required=True)

    constants = sub.add_parser("constants", parents=[common], help="lambda, alpha and rho of a chain")
    constants.add_argument("--chain", required=True)

    bound = sub.add_parser("bound", parents=[common], help="full verification report")
    bound.add_argument("--chain", required=True)
    bound.add_argument("--partition", required=True)
    bound.add_argument("--couplings")
    bound.add_argument("--product-couplings", action="store_true",
                       help="synthesize product couplings for every required pair")
    bound.add_argument("--complete-transpose", action="store_true",
                       help="use the transpose of kappa_ij when kappa_ji is missing")

    glued = sub.add_parser("glued", parents=[common], help="glued double graph instance")
    glued.add_argument("--graph", required=True)

    mixing = sub.add_parser("mixing", parents=[common], help="TV mixing curve as CSV")
    mixing.add_argument("--chain", required=True)
    mixing.add_argument("--eps", type=float, default=0.25)
    mixing.add_argument("--t-max", type=float, default=10.0)
    mixing.add_argument("--step", type=float, default=0.01)
    mixing.add_argument("--with-estimates", action="store_true",
                        help="also report MLSI and LSI mixing ratios from estimated constants")
    return parser


def setup_logging(verbosity: int) -> None:
    """Log to stderr; stdout carries the JSON/CSV output."""
    level = {0: config.app.log_level.upper(), 1: "INFO"}.get(verbosity, "DEBUG")
    logging.basicConfig(stream=sys.stderr, level=level, force=True,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def run_config_from_args(args: argparse.Namespace, overrides: dict) -> RunConfig:
    """Build and validate the RunConfig for a parsed command line."""
    fields = {
        "command": args.command,
        "seed": args.seed,
        "threads": args.threads,
        "tolerances": config.tolerances.with_overrides(overrides),
    }
    for name in ("chain", "partition", "couplings", "graph", "out", "restarts", "max_iter",
                 "product_couplings", "complete_transpose", "eps", "t_max", "step",
                 "with_estimates"):
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    return RunConfig(**fields)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a semantic failure, 2 on an I/O or parse failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_IO if e.code else 0
    setup_logging(args.verbose)

    is_valid, overrides, error_message = parse_tolerance_overrides(args.tol)
    if not is_valid:
        print(format_error_message(error_message), file=sys.stderr)
        return EXIT_IO
    try:
        run = run_config_from_args(args, overrides)
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        print(format_error_message(messages), file=sys.stderr)
        return EXIT_IO

    try:
        return COMMANDS[run.command](run)
    except ArtifactError as e:
        print(format_error_message(str(e)), file=sys.stderr)
        return EXIT_IO
    except FuzzyDecompError as e:
        print(format_error_message(str(e)), file=sys.stderr)
        return EXIT_FAILURE
    except OSError as e:
        print(format_error_message(f"I/O failure: {e}"), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
