from typing import Optional, Dict


class LLPackError(Exception):
    """Base error; `exit_code` is what the CLI returns for it."""

    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class UsageError(LLPackError):
    exit_code = 1


class ContractError(LLPackError):
    """A caller broke an API precondition (e.g. backward from a non-scalar)."""

    exit_code = 1


class FormatError(LLPackError):
    """Malformed container (PGM/PPM/.llpk). `offset` is the byte position."""

    exit_code = 2

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DomainError(LLPackError):
    exit_code = 2


class ShapeError(LLPackError):
    exit_code = 3


class ConfigError(LLPackError):
    exit_code = 3


class WeightError(LLPackError):
    exit_code = 3


class TrainingDivergedError(LLPackError):
    exit_code = 1

    def __init__(self, iteration: int, components: Dict[str, float]):
        details = ", ".join(f"{k}={v!r}" for k, v in components.items())
        super().__init__(f"Non-finite loss at iteration {iteration}: {details}")
        self.iteration = iteration
        self.components = components
