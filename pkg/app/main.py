import logging
import sys
from typing import Optional, Sequence

from .cli import dispatch, parse
from .core.config import settings
from .core.errors import LLPackError

# Configure logging
logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point: parse, run one subcommand, map failures to exit codes."""
    try:
        args = parse(argv)
        logging.getLogger().setLevel(args.log_level.upper())
        return dispatch(args)
    except LLPackError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.exception(f"Unhandled exception: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
