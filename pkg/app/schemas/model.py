from pydantic import Field, field_validator, model_validator
from typing import Dict

from .base import ConfigModel
from ..core.errors import ConfigError
from ..models.enums import BayerPhase, InputKind, UpsampleLayout


# ==================== Amplifier ====================

class HistogramConfig(ConfigModel):
    """Log-domain histogram; edges are v_min * r**k with r = (v_max / v_min) ** (1 / bins)."""
    bins: int = Field(default=64, ge=2)
    v_min: float = Field(default=2.0 ** -14, gt=0)
    v_max: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def validate_range(self):
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be smaller than v_max")
        return self


# ==================== Network ====================

class ModelConfig(ConfigModel):
    """
    Network topology.

    bayer-raw: Bayer split (Pack 2x) -> Pack alpha_inner per colour -> encoder
    -> RDN trunk -> UnPack 2x -> decoder conv -> UnPack alpha_inner.
    rgb: Pack alpha_inner per colour -> encoder -> RDN trunk -> decoder conv
    -> UnPack alpha_inner.
    """
    input_kind: InputKind = InputKind.BAYER_RAW
    alpha_inner: int = 8
    trunk_channels: int = Field(default=60, ge=1)
    rdn_blocks: int = Field(default=3, ge=1)
    rdn_layers: int = Field(default=6, ge=1)
    growth: int = Field(default=32, ge=1)
    activation_slope: float = Field(default=0.2, ge=0.0, le=1.0)
    decoder_layers: int = Field(default=1, ge=1)
    decoder_upsample: UpsampleLayout = UpsampleLayout.UNPACK
    phase: BayerPhase = BayerPhase.RGGB

    # Amplifier
    amplifier_hidden: int = Field(default=64, ge=1)
    histogram: HistogramConfig = Field(default_factory=HistogramConfig)
    gain_min: float = Field(default=1.0, gt=0)
    gain_max: float = Field(default=1000.0, gt=0)
    initial_gain: float = Field(default=100.0, gt=0)

    @field_validator("alpha_inner")
    @classmethod
    def validate_alpha(cls, v):
        if v not in (4, 8):
            raise ValueError("alpha_inner must be 4 or 8")
        return v

    @model_validator(mode="after")
    def validate_widths(self):
        if self.input_kind == InputKind.BAYER_RAW and self.trunk_channels % 4:
            raise ValueError("bayer-raw needs trunk_channels divisible by 4")
        if self.input_kind == InputKind.RGB and self.trunk_channels % 3:
            raise ValueError("rgb needs trunk_channels divisible by 3")
        if not self.gain_min <= self.initial_gain <= self.gain_max:
            raise ValueError("initial_gain must lie in [gain_min, gain_max]")
        return self

    @property
    def outer_factor(self) -> int:
        return 2 if self.input_kind == InputKind.BAYER_RAW else 1

    @property
    def total_factor(self) -> int:
        """Input dims must be divisible by this."""
        return self.outer_factor * self.alpha_inner

    @property
    def input_channels(self) -> int:
        return 1 if self.input_kind == InputKind.BAYER_RAW else 3

    @property
    def colour_planes(self) -> int:
        """Planes packed independently by the encoder (R, G1, G2, B or R, G, B)."""
        return 4 if self.input_kind == InputKind.BAYER_RAW else 3

    @property
    def encoder_width(self) -> int:
        return self.trunk_channels // self.colour_planes

    @property
    def decoder_in_channels(self) -> int:
        """Channels entering the decoder conv (after UnPack 2x for bayer-raw)."""
        return self.trunk_channels // (self.outer_factor ** 2)

    @property
    def decoder_out_channels(self) -> int:
        return 3 * self.alpha_inner ** 2


PRESETS: Dict[str, ModelConfig] = {
    "bayer8": ModelConfig(input_kind=InputKind.BAYER_RAW, alpha_inner=8),
    "rgb8": ModelConfig(input_kind=InputKind.RGB, alpha_inner=8),
    "rgb4": ModelConfig(input_kind=InputKind.RGB, alpha_inner=4),
}


def get_preset(name: str) -> ModelConfig:
    """Look up a named configuration (bayer8, rgb8, rgb4)."""
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"Unknown config preset {name!r}; choose from {', '.join(PRESETS)}") from None
