"""
Amplification estimate from the dark input.

A histogram with log-spaced edges feeds a one-hidden-layer perceptron whose
output z is read as ln(A); A = clamp(exp(z), gain_min, gain_max).
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..core import tensor as T
from ..core.errors import DomainError, ShapeError
from ..core.nnops import he_init, linear, relu
from ..core.optim import AdamState, adam_step
from ..core.tensor import Tape, Tensor
from ..models.weights import WeightStore
from ..schemas.model import HistogramConfig, ModelConfig
from ..schemas.training import AdamConfig, AmplifierTrainConfig

logger = logging.getLogger(__name__)

FC1_WEIGHT = "amplifier/fc1/weight"
FC1_BIAS = "amplifier/fc1/bias"
FC2_WEIGHT = "amplifier/fc2/weight"
FC2_BIAS = "amplifier/fc2/bias"


# ==================== Histogram ====================

@dataclass(frozen=True)
class HistogramFeature:
    """Bin probabilities, non-negative and summing to one."""
    mass: Tensor

    @property
    def bins(self) -> int:
        return self.mass.size


def histogram_edges(cfg: HistogramConfig = HistogramConfig()) -> np.ndarray:
    """bins + 1 edges e_k = v_min * r**k, with the end points pinned exactly."""
    ratio = (cfg.v_max / cfg.v_min) ** (1.0 / cfg.bins)
    edges = cfg.v_min * ratio ** np.arange(cfg.bins + 1, dtype=np.float64)
    edges[0] = cfg.v_min
    edges[-1] = cfg.v_max
    return edges


def bin_indices(values: np.ndarray, cfg: HistogramConfig = HistogramConfig()) -> np.ndarray:
    """Closed-left, open-right bins; below v_min -> 0, v_max and above -> last bin."""
    edges = histogram_edges(cfg)
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, cfg.bins - 1)


def log_histogram(raw: Tensor, cfg: HistogramConfig = HistogramConfig()) -> HistogramFeature:
    values = np.asarray(raw.data, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(values)):
        raise DomainError("Histogram input contains non-finite values")
    lo, hi = float(values.min()), float(values.max())
    if lo < 0.0 or hi > 1.0:
        raise DomainError(f"Histogram input must lie in [0, 1], got [{lo:.6g}, {hi:.6g}]")
    counts = np.bincount(bin_indices(values, cfg), minlength=cfg.bins)
    return HistogramFeature(mass=Tensor(counts / values.size))


# ==================== Perceptron ====================

@dataclass(frozen=True)
class AmplifierMLP:
    w1: Tensor  # [bins, hidden]
    b1: Tensor  # [hidden]
    w2: Tensor  # [hidden, 1]
    b2: Tensor  # [1]

    @property
    def hidden(self) -> int:
        return self.w1.dims[1]

    @classmethod
    def from_weights(cls, weights: WeightStore) -> "AmplifierMLP":
        return cls(
            w1=weights[FC1_WEIGHT],
            b1=weights[FC1_BIAS],
            w2=weights[FC2_WEIGHT],
            b2=weights[FC2_BIAS],
        )

    @classmethod
    def constant(cls, bins: int, hidden: int, log_gain: float = 0.0) -> "AmplifierMLP":
        """All-zero weights with output bias `log_gain`; predicts exp(log_gain) for any input."""
        return cls(
            w1=T.tensor_new((bins, hidden), 0.0),
            b1=T.tensor_new((hidden,), 0.0),
            w2=T.tensor_new((hidden, 1), 0.0),
            b2=T.tensor_new((1,), log_gain),
        )

    def to_arrays(self) -> Dict[str, np.ndarray]:
        return {
            FC1_WEIGHT: self.w1.data,
            FC1_BIAS: self.b1.data,
            FC2_WEIGHT: self.w2.data,
            FC2_BIAS: self.b2.data,
        }


def amplifier_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    bins, hidden = config.histogram.bins, config.amplifier_hidden
    return {
        FC1_WEIGHT: (bins, hidden),
        FC1_BIAS: (hidden,),
        FC2_WEIGHT: (hidden, 1),
        FC2_BIAS: (1,),
    }


def init_amplifier(config: ModelConfig, rng: np.random.Generator) -> Dict[str, Tensor]:
    """He-initialised weights; the output bias starts at ln(initial_gain)."""
    shapes = amplifier_shapes(config)
    return {
        FC1_WEIGHT: he_init(shapes[FC1_WEIGHT], rng),
        FC1_BIAS: T.tensor_new(shapes[FC1_BIAS], 0.0),
        FC2_WEIGHT: he_init(shapes[FC2_WEIGHT], rng),
        FC2_BIAS: T.tensor_new(shapes[FC2_BIAS], float(np.log(config.initial_gain))),
    }


def log_amplification(h: Union[HistogramFeature, Tensor], mlp: AmplifierMLP) -> Tensor:
    """z = W2 . relu(W1 . h + b1) + b2; accepts one histogram [bins] or a batch [n, bins]."""
    mass = h.mass if isinstance(h, HistogramFeature) else h
    if mass.dims[-1] != mlp.w1.dims[0]:
        raise ShapeError(f"Histogram has {mass.dims[-1]} bins, amplifier expects {mlp.w1.dims[0]}")
    hidden = relu(linear(mass, mlp.w1, mlp.b1))
    return linear(hidden, mlp.w2, mlp.b2)


def amplification_tensor(
    h: HistogramFeature,
    mlp: AmplifierMLP,
    gain_min: float = 1.0,
    gain_max: float = 1000.0,
) -> Tensor:
    """Differentiable A as a one-element tensor."""
    z = log_amplification(h, mlp)
    z = T.clamp(z, float(np.log(gain_min)), float(np.log(gain_max)))
    return T.clamp(T.exp(z), gain_min, gain_max)


def predict_amplification(
    h: HistogramFeature,
    mlp: AmplifierMLP,
    gain_min: float = 1.0,
    gain_max: float = 1000.0,
) -> float:
    return amplification_tensor(h, mlp, gain_min, gain_max).item()


def apply_amplification(raw: Tensor, amplification: Union[float, Tensor]) -> Tensor:
    """raw * A without clipping (values may exceed 1 in the linear domain)."""
    if isinstance(amplification, Tensor):
        if amplification.item() < 1.0:
            raise DomainError(f"Amplification must be >= 1, got {amplification.item():.6g}")
        return T.mul_scalar(raw, amplification)
    if amplification < 1.0:
        raise DomainError(f"Amplification must be >= 1, got {amplification:.6g}")
    if amplification == 1.0:
        return raw
    return T.scale(raw, amplification)


# ==================== Supervised training ====================

def train_amplifier(
    samples: Sequence[Tuple[Tensor, float]],
    config: ModelConfig = ModelConfig(),
    train_config: AmplifierTrainConfig = AmplifierTrainConfig(),
    initial: Optional[AmplifierMLP] = None,
) -> AmplifierMLP:
    """
    Fit the perceptron so that z regresses ln(k) over (dark image, k) pairs.

    Full-batch Adam on the mean squared error in the log domain.
    """
    if not samples:
        raise ShapeError("train_amplifier needs at least one sample")
    features = np.stack([log_histogram(raw, config.histogram).mass.data for raw, _ in samples])
    targets = np.log(np.array([[k] for _, k in samples], dtype=np.float32))
    x = Tensor(features)
    y = Tensor(targets)

    if initial is None:
        rng = np.random.default_rng(train_config.seed)
        params = {n: t.data for n, t in init_amplifier(config, rng).items()}
    else:
        params = initial.to_arrays()
    state = AdamState.zeros(params)
    adam = AdamConfig(lr=train_config.lr)

    loss_value = float("nan")
    for it in range(train_config.iters):
        tape = Tape()
        watched = {n: tape.watch(p, name=n) for n, p in params.items()}
        mlp = AmplifierMLP(
            w1=watched[FC1_WEIGHT], b1=watched[FC1_BIAS],
            w2=watched[FC2_WEIGHT], b2=watched[FC2_BIAS],
        )
        loss = T.mean_all(T.square(T.sub(log_amplification(x, mlp), y)))
        tape.backward(loss)
        grads = {n: watched[n].grad for n in params}
        params, state = adam_step(params, grads, state, adam)
        loss_value = loss.item()
        if it % 500 == 0:
            logger.debug(f"amplifier iter {it}: log-mse {loss_value:.6f}")

    logger.info(f"Amplifier trained on {len(samples)} samples, final log-mse {loss_value:.6f}")
    return AmplifierMLP(**{
        "w1": Tensor(params[FC1_WEIGHT]), "b1": Tensor(params[FC1_BIAS]),
        "w2": Tensor(params[FC2_WEIGHT]), "b2": Tensor(params[FC2_BIAS]),
    })
