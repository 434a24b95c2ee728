from pydantic import Field, model_validator
from typing import ClassVar, List, Tuple

from .base import RecordModel


class BenchResult(RecordModel):
    """
    One benchmark row.

    `mean_s` is the 10% trimmed mean of the timed repetitions; `peak_bytes`
    comes from the engine allocation tracker, not the OS.
    """
    op: str
    shape: Tuple[int, ...]
    alpha: int = Field(..., ge=1)
    reps: int = Field(..., ge=5)
    median_s: float = Field(..., ge=0)
    mean_s: float = Field(..., ge=0)
    min_s: float = Field(..., ge=0)
    max_s: float = Field(..., ge=0)
    peak_bytes: int = Field(default=0, ge=0)
    params: int = Field(default=0, ge=0)

    CSV_HEADER: ClassVar[List[str]] = [
        "op", "shape", "alpha", "reps", "median_s", "mean_s", "peak_bytes", "params"
    ]

    @model_validator(mode="after")
    def validate_median(self):
        if not self.min_s <= self.median_s <= self.max_s:
            raise ValueError("median must lie within [min, max]")
        return self

    @property
    def shape_label(self) -> str:
        return "x".join(str(d) for d in self.shape)

    def csv_row(self) -> List[str]:
        return [
            self.op,
            self.shape_label,
            str(self.alpha),
            str(self.reps),
            f"{self.median_s:.6f}",
            f"{self.mean_s:.6f}",
            str(self.peak_bytes),
            str(self.params),
        ]
