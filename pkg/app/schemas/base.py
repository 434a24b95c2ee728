from pydantic import BaseModel, ConfigDict, ValidationError
from typing import Any, List, TypeVar

from ..core.errors import ConfigError

T = TypeVar("T", bound="ConfigModel")


def describe_validation_error(exc: ValidationError) -> str:
    """One-line summary of every failing field, `loc: msg; loc: msg`."""
    parts: List[str] = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "value"
        parts.append(f"{loc}: {err.get('msg', '')}")
    return "; ".join(parts)


class ConfigModel(BaseModel):
    """
    Base for every structured configuration.

    Instances are immutable; derive variants with `model_copy(update=...)`.
    Unknown keys are rejected so misspelled options never pass silently.
    """
    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    @classmethod
    def from_options(cls: type[T], **options: Any) -> T:
        """
        Build from loosely typed options (CLI flags, JSON); `None` means default.

        Raises:
            ConfigError: if any field fails validation
        """
        try:
            return cls(**{k: v for k, v in options.items() if v is not None})
        except ValidationError as exc:
            raise ConfigError(f"Invalid {cls.__name__}: {describe_validation_error(exc)}") from exc


class RecordModel(BaseModel):
    """Base for result rows (loss curve, bench results)."""
    model_config = ConfigDict(frozen=True)
