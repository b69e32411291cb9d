"""Command line entry point."""

import argparse
import logging
import sys
from typing import Optional, Sequence

from aind_network_regression import add_stderr_logger
from aind_network_regression.experiment import (
    ConfigError,
    DataError,
    Experiment,
    ReferenceNotConvergedError,
    load_config,
)
from aind_network_regression.simnet import audit_ledger, read_ledger
from aind_network_regression.topology import NetworkError, random_walk_network

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NOT_CONVERGED = 4


def build_parser() -> argparse.ArgumentParser:
    """Parser with the run, central, gen-network and audit subcommands."""
    parser = argparse.ArgumentParser(
        prog="network-regression",
        description=(
            "Distributed regression over agents holding additive summands "
            "of the data."
        ),
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level for stderr output.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a configured experiment.")
    run.add_argument("config", help="Path to a key = value config file.")

    central = subparsers.add_parser(
        "central", help="Solve the centralized problem only."
    )
    central.add_argument("config", help="Path to a key = value config file.")

    gen = subparsers.add_parser(
        "gen-network", help="Print a random-walk network."
    )
    gen.add_argument("m", type=int, help="Number of agents.")
    gen.add_argument("seed", type=int, help="Random seed.")

    audit = subparsers.add_parser("audit", help="Audit a ledger file.")
    audit.add_argument("ledger", help="Ledger file written by 'run'.")
    return parser


def _run(config_path: str) -> int:
    """Handle the run subcommand."""
    summary = Experiment(load_config(config_path)).run_experiment()
    print(summary.line())
    return EXIT_OK


def _central(config_path: str) -> int:
    """Handle the central subcommand."""
    reference = Experiment(load_config(config_path)).run_central()
    print(
        f"iterations={reference.iterations} "
        f"objective={reference.objective!r} "
        f"residual_norm={reference.residual_norm!r}"
    )
    return EXIT_OK


def _gen_network(m: int, seed: int) -> int:
    """Handle the gen-network subcommand."""
    try:
        net = random_walk_network(m, seed)
    except NetworkError as e:
        logger.error(e)
        return EXIT_CONFIG
    sys.stdout.write(net.to_text())
    return EXIT_OK


def _audit(ledger_path: str) -> int:
    """Handle the audit subcommand."""
    try:
        net, payload_size, ledger = read_ledger(ledger_path)
    except (OSError, ValueError) as e:
        logger.error(f"Unable to read ledger: {e}")
        return EXIT_DATA
    report = audit_ledger(ledger, net, payload_size)
    print(
        f"messages={report.message_count} expected={report.expected_count} "
        f"rounds={report.rounds} violations={len(report.violations)}"
    )
    for violation in report.violations:
        print(violation)
    return EXIT_OK if report.ok else EXIT_FAILURE


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, dispatch the subcommand and map failures to exit
    codes: 2 configuration, 3 data, 4 reference non-convergence.
    """
    args = build_parser().parse_args(argv)
    add_stderr_logger(getattr(logging, args.log_level))
    try:
        if args.command == "run":
            return _run(args.config)
        if args.command == "central":
            return _central(args.config)
        if args.command == "gen-network":
            return _gen_network(args.m, args.seed)
        return _audit(args.ledger)
    except ConfigError as e:
        logger.error(e)
        return EXIT_CONFIG
    except DataError as e:
        logger.error(e)
        return EXIT_DATA
    except ReferenceNotConvergedError as e:
        logger.error(e)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
