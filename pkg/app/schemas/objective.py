from pydantic import Field, field_validator
from typing import ClassVar, List, Tuple

from .base import ConfigModel, RecordModel


class LossWeights(ConfigModel):
    """Coefficients of the composite loss."""
    l1: float = Field(default=1.0, ge=0)        # colour fidelity
    feature: float = Field(default=3.0, ge=0)   # content (feature pyramid)
    smooth: float = Field(default=1.0, ge=0)    # blurred colour loss
    tv: float = Field(default=400.0, ge=0)
    weight: float = Field(default=1e-6, ge=0)   # L1 on parameters


class BlurConfig(ConfigModel):
    size: int = Field(default=11, ge=1)
    sigma: float = Field(default=3.0, gt=0)

    @field_validator("size")
    @classmethod
    def validate_size(cls, v):
        if v % 2 == 0:
            raise ValueError("Blur size must be odd")
        return v


class FeatureExtractorConfig(ConfigModel):
    """Frozen 3-stage pyramid standing in for a pretrained feature network."""
    channels: Tuple[int, ...] = (16, 32, 64)
    seed: int = 0
    slope: float = Field(default=0.2, ge=0.0, le=1.0)

    @field_validator("channels")
    @classmethod
    def validate_channels(cls, v):
        if not v or any(c < 1 for c in v):
            raise ValueError("channels must be a non-empty tuple of positive widths")
        return v


class LossRecord(RecordModel):
    """One row of the loss curve."""
    iteration: int = Field(..., ge=0)
    total: float
    l1: float
    feat: float
    smooth: float
    tv: float
    wl1: float

    CSV_HEADER: ClassVar[List[str]] = ["iter", "total", "l1", "feat", "smooth", "tv", "wl1"]

    def csv_row(self) -> List[str]:
        return [str(self.iteration)] + [
            repr(float(v)) for v in (self.total, self.l1, self.feat, self.smooth, self.tv, self.wl1)
        ]
