from pydantic import BaseModel, Field, model_validator
from typing import List, Optional

from .base import ConfigModel
from ..core.config import settings
from ..models.enums import BayerPhase, InputKind


class NoiseModel(ConfigModel):
    """
    Heteroscedastic Gaussian sensor noise on the darkened signal s.

    variance = read_sigma**2 + shot_gain * s
    """
    read_sigma: float = Field(default=0.001, ge=0)
    shot_gain: float = Field(default=1e-4, ge=0)


class PairMeta(BaseModel):
    """Per-pair metadata stored as meta.json next to the images."""
    black: int = Field(default_factory=lambda: settings.DEFAULT_BLACK_LEVEL, ge=0)
    white: int = Field(default_factory=lambda: settings.DEFAULT_WHITE_LEVEL, ge=1)
    phase: BayerPhase = BayerPhase.RGGB
    k: float = Field(..., ge=1.0)
    input_kind: InputKind = InputKind.BAYER_RAW

    @model_validator(mode="after")
    def validate_levels(self):
        if self.white <= self.black:
            raise ValueError("white level must exceed black level")
        if self.white > 65535:
            raise ValueError("white level must fit in 16 bits")
        return self


class DatasetManifest(BaseModel):
    """Root manifest.json of a synthetic dataset directory."""
    count: int = Field(..., ge=0)
    ids: List[str] = Field(default_factory=list)
    input_kind: InputKind = InputKind.BAYER_RAW
    height: int = Field(..., ge=1)
    width: int = Field(..., ge=1)
    factors: List[float] = Field(default_factory=list)
    seed: int = 0
    noise: Optional[NoiseModel] = None

    @model_validator(mode="after")
    def validate_ids(self):
        if len(self.ids) != self.count:
            raise ValueError(f"manifest lists {len(self.ids)} ids but count is {self.count}")
        return self
