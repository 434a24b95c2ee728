from .report import write_csv, write_loss_curve, write_bench_results, format_bytes
from .helpers import parse_shape, parse_amplify, parse_factors, shape_label
from .validators import (
    validate_readable, validate_writable, validate_divisible, validate_train_flags
)

__all__ = [
    "write_csv", "write_loss_curve", "write_bench_results", "format_bytes",
    "parse_shape", "parse_amplify", "parse_factors", "shape_label",
    "validate_readable", "validate_writable", "validate_divisible", "validate_train_flags",
]
