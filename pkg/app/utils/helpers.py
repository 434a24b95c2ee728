from typing import List, Optional, Tuple, Union

from ..core.errors import UsageError


def parse_shape(text: str, rank: Optional[int] = None) -> Tuple[int, ...]:
    """Parse `1024x1024x32` (or `,`-separated) into a tuple of positive ints."""
    parts = [p for p in text.replace(",", "x").lower().split("x") if p]
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"Cannot parse shape {text!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise UsageError(f"Shape {text!r} must list positive integers")
    if rank is not None and len(dims) != rank:
        raise UsageError(f"Shape {text!r} must have {rank} dims")
    return dims


def parse_amplify(text: str) -> Optional[float]:
    """`auto` -> None (learned amplifier), otherwise a factor >= 1."""
    if text.strip().lower() == "auto":
        return None
    try:
        factor = float(text)
    except ValueError:
        raise UsageError(f"--amplify expects 'auto' or a number, got {text!r}") from None
    if factor < 1.0:
        raise UsageError(f"--amplify factor must be >= 1, got {factor}")
    return factor


def parse_factors(text: str) -> List[float]:
    """Comma-separated exposure factors, each >= 1."""
    try:
        factors = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"Cannot parse factors {text!r}") from None
    if any(f < 1.0 for f in factors):
        raise UsageError("Exposure factors must be >= 1")
    return factors


def shape_label(dims: Union[Tuple[int, ...], List[int]]) -> str:
    return "x".join(str(d) for d in dims)
