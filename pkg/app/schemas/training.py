from pydantic import Field
from typing import Optional

from .base import ConfigModel
from .objective import BlurConfig, FeatureExtractorConfig, LossWeights


class AdamConfig(ConfigModel):
    lr: float = Field(default=1e-4, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)


class TrainConfig(ConfigModel):
    """
    Optimisation run settings.

    Batch size is 1: every iteration draws one pair (and one patch when
    `patch_size` is set) from a generator seeded with (seed, iteration).
    """
    iters: int = Field(default=1000, ge=0)
    seed: int = 0
    checkpoint_every: int = Field(default=0, ge=0)  # 0 disables checkpoints
    log_every: int = Field(default=50, ge=1)
    patch_size: Optional[int] = Field(default=None, ge=1)
    clip_norm: Optional[float] = Field(default=None, gt=0)
    use_true_factor: bool = False
    adam: AdamConfig = Field(default_factory=AdamConfig)
    loss: LossWeights = Field(default_factory=LossWeights)
    blur: BlurConfig = Field(default_factory=BlurConfig)
    feature: FeatureExtractorConfig = Field(default_factory=FeatureExtractorConfig)


class AmplifierTrainConfig(ConfigModel):
    """Supervised regression of the amplifier onto ln(k)."""
    iters: int = Field(default=3000, ge=0)
    lr: float = Field(default=1e-3, gt=0)
    seed: int = 0
