from .config import settings, get_settings
from .errors import (
    LLPackError, UsageError, ContractError, FormatError, DomainError,
    ShapeError, ConfigError, WeightError, TrainingDivergedError
)
from .tensor import Tensor, Tape, tensor_new, backward, track_allocations

__all__ = [
    "settings",
    "get_settings",
    "LLPackError",
    "UsageError",
    "ContractError",
    "FormatError",
    "DomainError",
    "ShapeError",
    "ConfigError",
    "WeightError",
    "TrainingDivergedError",
    "Tensor",
    "Tape",
    "tensor_new",
    "backward",
    "track_allocations",
]
