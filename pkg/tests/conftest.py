from typing import Callable

import numpy as np
import pytest

from app.core.tensor import Tape, Tensor, tensor_new
from app.models.enums import InputKind
from app.schemas.model import HistogramConfig, ModelConfig
from app.services.dataset_service import write_dataset

# fixtures

@pytest.fixture
def rng():
    yield np.random.default_rng(1234)


@pytest.fixture
def worked_example():
    """2x2x12 tensor whose channel c (0-based) holds 4c+1 .. 4c+4 in row-major order."""
    values = [4 * c + 2 * i + j + 1 for i in range(2) for j in range(2) for c in range(12)]
    yield tensor_new((2, 2, 12), values)


@pytest.fixture
def tiny_config():
    """rgb alpha=4 network small enough for multi-step training in tests."""
    yield ModelConfig(
        input_kind=InputKind.RGB,
        alpha_inner=4,
        trunk_channels=6,
        rdn_blocks=1,
        rdn_layers=2,
        growth=4,
        amplifier_hidden=8,
        histogram=HistogramConfig(bins=8),
    )


@pytest.fixture
def rgb_dataset(tmp_path):
    root = tmp_path / "rgb_data"
    write_dataset(root, 2, height=16, width=16, factors=(50.0, 100.0), seed=3, input_kind=InputKind.RGB)
    yield root


@pytest.fixture
def bayer_dataset(tmp_path):
    root = tmp_path / "bayer_data"
    write_dataset(root, 3, height=32, width=32, factors=(50.0, 100.0, 250.0), seed=5)
    yield root


def _numeric_grad(fn: Callable, arrays, index: int, eps: float) -> np.ndarray:
    base = [np.array(a, dtype=np.float64) for a in arrays]
    grad = np.zeros_like(base[index])
    for pos in np.ndindex(base[index].shape):
        plus = [a.copy() for a in base]
        minus = [a.copy() for a in base]
        plus[index][pos] += eps
        minus[index][pos] -= eps
        f_plus = fn(*[Tensor(a, dtype=np.float64) for a in plus]).item()
        f_minus = fn(*[Tensor(a, dtype=np.float64) for a in minus]).item()
        grad[pos] = (f_plus - f_minus) / (2 * eps)
    return grad


@pytest.fixture
def gradcheck():
    """
    check(fn, *arrays): compare tape gradients of the scalar fn(*tensors)
    against float64 central differences, |a - n| <= rtol * max(|a|, |n|) + atol.
    """

    def check(fn: Callable, *arrays, eps: float = 1e-6, rtol: float = 1e-3, atol: float = 1e-6) -> None:
        tape = Tape()
        leaves = [tape.watch(Tensor(np.asarray(a, dtype=np.float64), dtype=np.float64)) for a in arrays]
        root = fn(*leaves)
        grads = tape.backward(root)
        for i, leaf in enumerate(leaves):
            analytic = grads[leaf.node_id]
            numeric = _numeric_grad(fn, arrays, i, eps)
            assert analytic.shape == numeric.shape
            bound = rtol * np.maximum(np.abs(analytic), np.abs(numeric)) + atol
            worst = np.max(np.abs(analytic - numeric) - bound)
            assert worst <= 0, f"input {i}: analytic {analytic.ravel()[:6]} vs numeric {numeric.ravel()[:6]}"

    return check
