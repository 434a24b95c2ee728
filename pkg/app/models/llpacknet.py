"""
Network assembly, parameter naming and the receptive-field probe.

Parameter names (bayer8 defaults in brackets):

    amplifier/fc1/weight [64, 64]      amplifier/fc1/bias [64]
    amplifier/fc2/weight [64, 1]       amplifier/fc2/bias [1]
    encoder/color{c}/weight [3, 3, a^2, T/planes]   (c = 0..planes-1)
    trunk/block{b}/layer{l}/weight [3, 3, T + l*growth, growth]
    trunk/block{b}/fusion/weight [1, 1, T + L*growth, T]
    trunk/global_fusion/weight [1, 1, B*T, T]
    trunk/global_conv/weight [3, 3, T, T]
    decoder/conv{i}/weight [3, 3, D, D] ... last [3, 3, D, 3*a^2]

and a matching `/bias` for every `/weight` except fc biases listed above.
T = trunk channels, D = channels entering the decoder.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from ..core import tensor as T
from ..core.errors import ShapeError
from ..core.nnops import ConvKernel, concat_channels, conv2d, he_init, leaky_relu, same_kernel
from ..core.rearrange import bayer_split, pack, pixel_shuffle, unpack
from ..core.tensor import Tape, Tensor
from ..schemas.model import ModelConfig
from ..services import amplifier_service
from .enums import InputKind, UpsampleLayout
from .weights import WeightStore

logger = logging.getLogger(__name__)

StageHook = Callable[[str, Tensor], None]


# ==================== Parameters ====================

def parameter_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Every parameter name with its dims, in build order."""
    shapes: Dict[str, Tuple[int, ...]] = dict(amplifier_service.amplifier_shapes(config))
    a2 = config.alpha_inner ** 2
    width = config.encoder_width
    trunk = config.trunk_channels

    for c in range(config.colour_planes):
        shapes[f"encoder/color{c}/weight"] = (3, 3, a2, width)
        shapes[f"encoder/color{c}/bias"] = (width,)

    for b in range(config.rdn_blocks):
        for l in range(config.rdn_layers):
            cin = trunk + l * config.growth
            shapes[f"trunk/block{b}/layer{l}/weight"] = (3, 3, cin, config.growth)
            shapes[f"trunk/block{b}/layer{l}/bias"] = (config.growth,)
        dense = trunk + config.rdn_layers * config.growth
        shapes[f"trunk/block{b}/fusion/weight"] = (1, 1, dense, trunk)
        shapes[f"trunk/block{b}/fusion/bias"] = (trunk,)

    shapes["trunk/global_fusion/weight"] = (1, 1, config.rdn_blocks * trunk, trunk)
    shapes["trunk/global_fusion/bias"] = (trunk,)
    shapes["trunk/global_conv/weight"] = (3, 3, trunk, trunk)
    shapes["trunk/global_conv/bias"] = (trunk,)

    d_in = config.decoder_in_channels
    for i in range(config.decoder_layers):
        last = i == config.decoder_layers - 1
        cout = config.decoder_out_channels if last else d_in
        shapes[f"decoder/conv{i}/weight"] = (3, 3, d_in, cout)
        shapes[f"decoder/conv{i}/bias"] = (cout,)
    return shapes


def build(config: ModelConfig, seed: Union[int, np.random.Generator] = 0) -> WeightStore:
    """He-initialised weights, zero biases; the amplifier output bias starts at ln(initial_gain)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tensors: Dict[str, Tensor] = dict(amplifier_service.init_amplifier(config, rng))
    for name, dims in parameter_shapes(config).items():
        if name in tensors:
            continue
        if name.endswith("/bias"):
            tensors[name] = T.tensor_new(dims, 0.0)
        else:
            tensors[name] = he_init(dims, rng)
    store = WeightStore(tensors)
    logger.info(
        f"Built {config.input_kind.value} alpha={config.alpha_inner} network: "
        f"{store.parameter_count()} parameters in {len(store)} tensors"
    )
    return store


def validate_weights(weights: WeightStore, config: ModelConfig) -> None:
    """Raise WeightError unless `weights` matches `config` exactly."""
    weights.check_shapes(parameter_shapes(config))


# ==================== Forward ====================

def _kernel(weights: WeightStore, prefix: str) -> ConvKernel:
    return same_kernel(weights[f"{prefix}/weight"], weights[f"{prefix}/bias"])


def _rdn_block(h: Tensor, weights: WeightStore, config: ModelConfig, b: int) -> Tensor:
    features = [h]
    for l in range(config.rdn_layers):
        y = conv2d(concat_channels(features), _kernel(weights, f"trunk/block{b}/layer{l}"))
        features.append(leaky_relu(y, config.activation_slope))
    fused = conv2d(concat_channels(features), _kernel(weights, f"trunk/block{b}/fusion"))
    return T.add(fused, h)


def check_input(raw: Tensor, config: ModelConfig) -> None:
    if raw.ndim != 3 or raw.dims[2] != config.input_channels:
        raise ShapeError(
            f"{config.input_kind.value} input must be [H, W, {config.input_channels}], got {raw.dims}"
        )
    f = config.total_factor
    H, W, _ = raw.dims
    if H % f or W % f:
        raise ShapeError(f"Input {H}x{W} is not divisible by {f}")


def amplification_for(raw: Tensor, weights: WeightStore, config: ModelConfig) -> Tensor:
    """Differentiable amplification predicted by the network's own amplifier."""
    h = amplifier_service.log_histogram(raw, config.histogram)
    mlp = amplifier_service.AmplifierMLP.from_weights(weights)
    return amplifier_service.amplification_tensor(h, mlp, config.gain_min, config.gain_max)


def forward(
    raw: Tensor,
    weights: WeightStore,
    config: ModelConfig,
    amplification: Optional[Union[float, Tensor]] = None,
    hook: Optional[StageHook] = None,
) -> Tensor:
    """
    Enhance one image; output is [H, W, 3] in [0, 1].

    `amplification=None` uses the learned amplifier, a number uses that factor
    (ground-truth exposure). `hook(stage, tensor)` sees every intermediate.
    """
    check_input(raw, config)
    emit = hook or (lambda stage, t: None)
    alpha = config.alpha_inner
    a2 = alpha * alpha
    slope = config.activation_slope

    if amplification is None:
        amplification = amplification_for(raw, weights, config)
    x = amplifier_service.apply_amplification(raw, amplification)
    emit("amplified", x)

    if config.input_kind == InputKind.BAYER_RAW:
        x = bayer_split(x, config.phase)
        emit("bayer_split", x)

    packed = pack(x, alpha, group=1)
    emit("packed", packed)

    encoded = []
    for c in range(config.colour_planes):
        plane = T.slice_channels(packed, c * a2, (c + 1) * a2)
        y = conv2d(plane, _kernel(weights, f"encoder/color{c}"))
        encoded.append(leaky_relu(y, slope))
    f0 = concat_channels(encoded)
    emit("encoder", f0)

    h = f0
    block_outputs: List[Tensor] = []
    for b in range(config.rdn_blocks):
        h = _rdn_block(h, weights, config, b)
        block_outputs.append(h)
        emit(f"trunk/block{b}", h)
    g = conv2d(concat_channels(block_outputs), _kernel(weights, "trunk/global_fusion"))
    g = conv2d(g, _kernel(weights, "trunk/global_conv"))
    trunk = T.add(g, f0)
    emit("trunk", trunk)

    d = trunk
    if config.input_kind == InputKind.BAYER_RAW:
        d = unpack(trunk, 2, group=config.decoder_in_channels)
        emit("unpack_outer", d)

    for i in range(config.decoder_layers):
        d = leaky_relu(conv2d(d, _kernel(weights, f"decoder/conv{i}")), slope)
    emit("decoder", d)

    if config.decoder_upsample == UpsampleLayout.PIXEL_SHUFFLE:
        out = pixel_shuffle(d, alpha)
    else:
        out = unpack(d, alpha, group=3)
    out = T.clamp(out, 0.0, 1.0)
    emit("output", out)
    return out


@dataclass(frozen=True)
class EnhanceResult:
    output: Tensor
    amplification: float


def enhance_image(
    raw: Tensor,
    weights: WeightStore,
    config: ModelConfig,
    amplification: Optional[float] = None,
) -> EnhanceResult:
    """Inference entry point: resolves the factor once, then runs forward."""
    if amplification is None:
        amplification = amplification_for(raw, weights, config).item()
    out = forward(raw, weights, config, amplification=amplification)
    return EnhanceResult(output=out, amplification=float(amplification))


# ==================== Receptive field ====================

def count_receptive_field(alpha: int, seed: int = 0) -> int:
    """
    HR input pixels that influence one LR output of Pack alpha followed by a
    3x3 convolution, counted as the support of the input gradient.
    """
    if alpha < 1:
        raise ShapeError(f"alpha must be >= 1, got {alpha}")
    rng = np.random.default_rng(seed)
    lr_size = 5
    size = lr_size * alpha
    tape = Tape()
    x = tape.watch(rng.uniform(0.0, 1.0, size=(size, size, 1)).astype(np.float32), name="input")
    w = Tensor(rng.uniform(0.5, 1.5, size=(3, 3, alpha * alpha, 1)).astype(np.float32))
    y = conv2d(pack(x, alpha, group=1), same_kernel(w))
    mask = np.zeros(y.dims, dtype=np.float32)
    mask[lr_size // 2, lr_size // 2, 0] = 1.0
    root = T.sum_all(T.mul(y, Tensor(mask)))
    grads = tape.backward(root)
    return int(np.count_nonzero(grads[x.node_id]))
