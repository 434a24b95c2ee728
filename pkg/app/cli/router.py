import argparse
import logging
from typing import Optional, Sequence

from ..core.config import settings
from ..core.errors import UsageError
from ..middleware.timing import TimingMiddleware
from .commands import bench, enhance, probe_rf, synth, train
from .deps import FORMATTER

logger = logging.getLogger(__name__)

COMMANDS = (enhance, train, bench, synth, probe_rf)


class CliParser(argparse.ArgumentParser):
    """argparse parser whose usage errors become UsageError (exit 1) instead of SystemExit(2)."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage().rstrip()}")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="llpack",
        description=settings.APP_NAME,
        formatter_class=FORMATTER,
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="logging level")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def dispatch(args: argparse.Namespace) -> int:
    handler = TimingMiddleware(args.handler, args.command)
    return handler(args)


def parse(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
