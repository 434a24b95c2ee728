import logging
import time
from typing import Callable

from ..core.errors import LLPackError

logger = logging.getLogger(__name__)

Handler = Callable[..., int]


class TimingMiddleware:
    """Wraps a subcommand handler, logging its start, exit code and wall time."""

    def __init__(self, handler: Handler, name: str):
        self.handler = handler
        self.name = name

    def __call__(self, *args, **kwargs) -> int:
        start_time = time.perf_counter()

        logger.info(f"Command: {self.name}")

        try:
            exit_code = self.handler(*args, **kwargs)
        except LLPackError as exc:
            process_time = time.perf_counter() - start_time
            logger.info(
                f"Finished: {self.name} "
                f"- Error: {type(exc).__name__} "
                f"- Time: {process_time:.4f}s"
            )
            raise

        process_time = time.perf_counter() - start_time
        logger.info(
            f"Finished: {self.name} "
            f"- Exit: {exit_code} "
            f"- Time: {process_time:.4f}s"
        )
        return exit_code
