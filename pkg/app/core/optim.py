"""
Adam with bias correction, plus global-norm gradient clipping.

Parameters, gradients and moments are plain name -> array mappings so the
same code drives the full network and the amplifier-only regression.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from .errors import ShapeError
from ..schemas.training import AdamConfig

logger = logging.getLogger(__name__)

Arrays = Dict[str, np.ndarray]

# .llpk stores float32 only; the step counter is split into two 24-bit digits
_STEP_RADIX = 1 << 24


@dataclass
class AdamState:
    m: Arrays = field(default_factory=dict)
    v: Arrays = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            m={n: np.zeros_like(p) for n, p in params.items()},
            v={n: np.zeros_like(p) for n, p in params.items()},
            step=0,
        )

    def to_arrays(self) -> Arrays:
        """Flatten for checkpointing: m/<name>, v/<name> and step as (high, low) 24-bit digits."""
        out: Arrays = {}
        for name in self.m:
            out[f"m/{name}"] = self.m[name]
            out[f"v/{name}"] = self.v[name]
        out["step"] = np.array(divmod(self.step, _STEP_RADIX), dtype=np.float32)
        return out

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "AdamState":
        m = {n[2:]: np.array(a) for n, a in arrays.items() if n.startswith("m/")}
        v = {n[2:]: np.array(a) for n, a in arrays.items() if n.startswith("v/")}
        if set(m) != set(v) or "step" not in arrays:
            raise ShapeError("Optimizer state is missing moments or the step counter")
        digits = [int(d) for d in np.asarray(arrays["step"]).reshape(-1)]
        step = 0
        for d in digits:
            step = step * _STEP_RADIX + d
        return cls(m=m, v=v, step=step)


def _check_aligned(params: Mapping[str, np.ndarray], other: Mapping[str, np.ndarray], what: str) -> None:
    if set(params) != set(other):
        missing = sorted(set(params) ^ set(other))
        raise ShapeError(f"{what} not aligned with parameters: {', '.join(missing[:5])}")
    for name, p in params.items():
        if other[name].shape != p.shape:
            raise ShapeError(f"{what} for {name!r} has shape {other[name].shape}, parameter {p.shape}")


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    config: AdamConfig = AdamConfig(),
) -> Tuple[Arrays, AdamState]:
    """One bias-corrected Adam update; returns new parameters and a new state."""
    _check_aligned(params, grads, "Gradients")
    if state.step == 0 and not state.m:
        state = AdamState.zeros(params)
    _check_aligned(params, state.m, "First moments")
    _check_aligned(params, state.v, "Second moments")

    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t

    new_params: Arrays = {}
    new_m: Arrays = {}
    new_v: Arrays = {}
    for name, p in params.items():
        g = grads[name].astype(p.dtype, copy=False)
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = (p - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)).astype(p.dtype, copy=False)
        new_m[name] = m.astype(p.dtype, copy=False)
        new_v[name] = v.astype(p.dtype, copy=False)
    return new_params, AdamState(m=new_m, v=new_v, step=t)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def clip_by_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Tuple[Arrays, float]:
    """Scale all gradients by max_norm / norm when the global norm exceeds max_norm."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return dict(grads), norm
    factor = max_norm / norm
    return {n: (g * factor).astype(g.dtype, copy=False) for n, g in grads.items()}, norm
