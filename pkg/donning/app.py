"""
donning – Application Factory
================================
Creates the command-line parser, registers every command blueprint and
maps errors to process exit codes:

    0  success
    1  step / expectation failure or any other build error
    2  usage or parse error
    3  store corruption (digest mismatch)

The human-readable report goes to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence, Union

from donning.config import Config
from donning.controllers.autobuild_controller import autobuild_bp
from donning.controllers.build_controller import build_bp
from donning.controllers.diff_controller import diff_bp
from donning.controllers.image_controller import image_bp
from donning.exceptions import DonningError, UsageError
from donning.utils.commands import Invocation, UsageParser

logger = logging.getLogger("donning")

BLUEPRINTS = (build_bp, image_bp, diff_bp, autobuild_bp)
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def create_app() -> argparse.ArgumentParser:
    """Application factory – builds the ``donning`` parser."""
    parser = UsageParser(prog="donning", description="Daemon-free layer-donning image builder.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output to stderr")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for blueprint in BLUEPRINTS:
        blueprint.register(subparsers)
    return parser


def configure_logging(level: Union[int, str] = logging.WARNING) -> None:
    """Send the ``donning`` loggers to stderr at *level*."""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.handlers = [handler]
    logger.setLevel(level)


def parse_args(argv: Optional[Sequence[str]] = None) -> Invocation:
    """Parse *argv* (default ``sys.argv[1:]``).

    Raises
    ------
    UsageError
        Unknown command or flag, or a missing argument.
    """
    args = create_app().parse_args(argv)
    return Invocation(command=args.command, args=args, handler=args.handler)


def dispatch(inv: Invocation) -> int:
    """Run *inv*'s handler and turn any error into an exit code."""
    try:
        return inv.handler(inv)
    except DonningError as exc:
        print(f"donning: {exc}", file=sys.stderr)
        logger.debug("[app] %s failed", inv.command, exc_info=True)
        return exc.exit_code
    except OSError as exc:
        print(f"donning: {exc}", file=sys.stderr)
        return 1
    except Exception:
        logger.exception("[app] unexpected error in %s", inv.command)
        return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        Config.validate()
        inv = parse_args(argv)
    except UsageError as exc:
        print(f"{exc}", file=sys.stderr)
        return exc.exit_code
    except EnvironmentError as exc:
        print(f"donning: {exc}", file=sys.stderr)
        return UsageError.exit_code

    configure_logging(logging.DEBUG if inv.verbose else Config.LOG_LEVEL)
    return dispatch(inv)
