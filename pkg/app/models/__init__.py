# Network and weight-store modules import the core tensor package, which in
# turn imports these enums; keep this package initializer to enums only.
from .enums import (
    InputKind, BayerPhase, UpsampleLayout, OpKind, BenchOp, Subcommand
)

__all__ = [
    "InputKind",
    "BayerPhase",
    "UpsampleLayout",
    "OpKind",
    "BenchOp",
    "Subcommand",
]
