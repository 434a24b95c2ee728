"""
Latency / allocation benchmarks for the upsampling operators and the full network.

Every operator is first checked against a loop-based reference on a cropped
input; timing only starts once that gate passes.
"""
import logging
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.config import settings
from ..core.errors import ContractError, ShapeError, UsageError
from ..core.nnops import ConvKernel, conv2d, he_init, interpolate_nearest, transposed_conv2d, zero_insert
from ..core.parallel import worker_limit
from ..core.rearrange import pixel_shuffle, unpack
from ..core.tensor import Tensor, tensor_new, track_allocations
from ..models import llpacknet
from ..models.enums import BenchOp
from ..models.weights import WeightStore
from ..schemas.bench import BenchResult
from ..schemas.model import ModelConfig

logger = logging.getLogger(__name__)

WARMUP = 2
MIN_REPS = 5
TRIM_FRACTION = 0.1
GATE_CROP = 8
GATE_TOLERANCE = 1e-4

# LR input shapes of the operator comparison (each upsampled 2x)
TABLE_SHAPES: List[Tuple[int, int, int]] = [(1024, 1024, 32), (256, 256, 128), (32, 32, 512)]


# ==================== Loop references ====================

def reference_unpack(x: np.ndarray, alpha: int, group: int) -> np.ndarray:
    """UnPack written as the row/col loop over channel slabs."""
    h, w, C = x.shape
    n = C // (group * alpha * alpha)
    out = np.empty((h * alpha, w * alpha, n * group), dtype=x.dtype)
    for gi in range(n):
        count = gi * group * alpha * alpha
        for row in range(alpha):
            for col in range(alpha):
                out[row::alpha, col::alpha, gi * group:(gi + 1) * group] = x[:, :, count:count + group]
                count += group
    return out


def reference_pack(x: np.ndarray, alpha: int, group: int) -> np.ndarray:
    H, W, C = x.shape
    n = C // group
    out = np.empty((H // alpha, W // alpha, C * alpha * alpha), dtype=x.dtype)
    count = 0
    for gi in range(n):
        for row in range(alpha):
            for col in range(alpha):
                out[:, :, count:count + group] = x[row::alpha, col::alpha, gi * group:(gi + 1) * group]
                count += group
    return out


def reference_pixel_shuffle(x: np.ndarray, alpha: int) -> np.ndarray:
    h, w, C = x.shape
    c_out = C // (alpha * alpha)
    out = np.empty((h * alpha, w * alpha, c_out), dtype=x.dtype)
    for c in range(c_out):
        for i in range(alpha):
            for j in range(alpha):
                out[i::alpha, j::alpha, c] = x[:, :, c * alpha * alpha + i * alpha + j]
    return out


def reference_interpolate(x: np.ndarray, alpha: int) -> np.ndarray:
    h, w, C = x.shape
    out = np.empty((h * alpha, w * alpha, C), dtype=x.dtype)
    for i in range(alpha):
        for j in range(alpha):
            out[i::alpha, j::alpha] = x
    return out


def reference_transposed_conv(x: Tensor, k: ConvKernel, alpha: int) -> np.ndarray:
    """conv2d over the zero-inserted input with the flipped kernel, cropped."""
    kh, kw = k.weights.dims[:2]
    ph, pw = k.pad_hw
    flipped = Tensor(np.ascontiguousarray(k.weights.data[::-1, ::-1]), dtype=k.weights.dtype)
    up = zero_insert(x, alpha)
    full = conv2d(up, ConvKernel(flipped, k.bias, stride=1, padding=(kh - 1 - ph, kw - 1 - pw))).data
    H, W = x.dims[:2]
    return full[: (H - 1) * alpha + kh - 2 * ph, : (W - 1) * alpha + kw - 2 * pw]


# ==================== Operators ====================

def transposed_kernel(channels: int, alpha: int, seed: int = 0) -> ConvKernel:
    """alpha x alpha kernel, stride alpha, channels -> channels / alpha^2, with bias."""
    cout = max(1, channels // (alpha * alpha))
    weights = he_init((alpha, alpha, channels, cout), seed)
    return ConvKernel(weights=weights, bias=tensor_new((cout,), 0.0), stride=alpha, padding=0)


def _operator(op: BenchOp, channels: int, alpha: int, seed: int) -> Tuple[Callable[[Tensor], Tensor], Callable[[Tensor], np.ndarray], int]:
    """(operator, loop reference, learnable parameter count)."""
    if op == BenchOp.UNPACK:
        group = channels // (alpha * alpha)
        return (
            lambda x: unpack(x, alpha, group),
            lambda x: reference_unpack(x.data, alpha, group),
            0,
        )
    if op == BenchOp.PIXEL_SHUFFLE:
        return (
            lambda x: pixel_shuffle(x, alpha),
            lambda x: reference_pixel_shuffle(x.data, alpha),
            0,
        )
    if op == BenchOp.INTERP:
        return (
            lambda x: interpolate_nearest(x, alpha),
            lambda x: reference_interpolate(x.data, alpha),
            0,
        )
    kernel = transposed_kernel(channels, alpha, seed)
    return (
        lambda x: transposed_conv2d(x, kernel, alpha),
        lambda x: reference_transposed_conv(x, kernel, alpha),
        kernel.parameter_count(),
    )


def parse_op(name: str) -> BenchOp:
    try:
        return BenchOp(name)
    except ValueError:
        choices = ", ".join(op.value for op in BenchOp)
        raise UsageError(f"Unknown bench op {name!r}; choose from {choices}") from None


def summarize(times: Sequence[float]) -> Dict[str, float]:
    """median, 10% trimmed mean, min and max of the timed repetitions."""
    ordered = np.sort(np.asarray(times, dtype=np.float64))
    cut = int(len(ordered) * TRIM_FRACTION)
    kept = ordered[cut:len(ordered) - cut] if len(ordered) > 2 * cut else ordered
    return {
        "median_s": float(np.median(ordered)),
        "mean_s": float(np.mean(kept)),
        "min_s": float(ordered[0]),
        "max_s": float(ordered[-1]),
    }


def _time(fn: Callable[[], object], reps: int) -> Tuple[List[float], int]:
    for _ in range(WARMUP):
        fn()
    times = []
    with track_allocations() as stats:
        for _ in range(reps):
            start = time.perf_counter()
            fn()
            times.append(time.perf_counter() - start)
    return times, stats.peak_bytes


def _label(name: str, threads: int) -> str:
    return f"{name}@{threads}t" if threads > 1 else name


def check_gate(op: BenchOp, shape: Tuple[int, int, int], alpha: int, seed: int = 0) -> None:
    """Raise ContractError if the operator disagrees with its loop reference."""
    h, w, c = shape
    fn, reference, _ = _operator(op, c, alpha, seed)
    rng = np.random.default_rng(seed)
    crop = Tensor(rng.standard_normal((min(h, GATE_CROP), min(w, GATE_CROP), c)))
    got = fn(crop).data
    want = reference(crop)
    if got.shape != want.shape or not np.allclose(got, want, atol=GATE_TOLERANCE, rtol=GATE_TOLERANCE):
        raise ContractError(f"{op.value} failed its correctness gate on a {crop.dims} crop")


def bench_op(
    op: str,
    shape: Tuple[int, int, int],
    alpha: int = 2,
    reps: int = 10,
    threads: int = 1,
    seed: int = 0,
) -> BenchResult:
    """Time one upsampling operator on an [h, w, C] input."""
    kind = parse_op(op)
    if reps < MIN_REPS:
        raise UsageError(f"reps must be >= {MIN_REPS}, got {reps}")
    h, w, c = shape
    if c % (alpha * alpha):
        raise ShapeError(f"{c} channels not divisible by alpha^2={alpha * alpha}")
    check_gate(kind, shape, alpha, seed)

    fn, _, params = _operator(kind, c, alpha, seed)
    x = Tensor(np.random.default_rng(seed).standard_normal(shape))
    with worker_limit(threads):
        times, peak = _time(lambda: fn(x), reps)
    result = BenchResult(
        op=_label(kind.value, threads),
        shape=tuple(shape),
        alpha=alpha,
        reps=reps,
        peak_bytes=peak,
        params=params,
        **summarize(times),
    )
    logger.info(f"{result.op} {result.shape_label}: median {result.median_s:.4f}s, params {params}")
    return result


def bench_forward(
    config: ModelConfig,
    shape: Tuple[int, int],
    reps: int = 5,
    weights: Optional[WeightStore] = None,
    threads: int = 1,
    seed: int = 0,
) -> BenchResult:
    """End-to-end forward latency and peak tracked allocation."""
    if reps < MIN_REPS:
        raise UsageError(f"reps must be >= {MIN_REPS}, got {reps}")
    H, W = shape
    weights = weights or llpacknet.build(config, seed)
    rng = np.random.default_rng(seed)
    raw = Tensor(rng.uniform(0.0, 0.01, size=(H, W, config.input_channels)))
    llpacknet.check_input(raw, config)

    with worker_limit(threads):
        times, peak = _time(lambda: llpacknet.forward(raw, weights, config), reps)
    if peak > settings.ALLOCATION_BUDGET_BYTES:
        logger.warning(f"Forward at {H}x{W} peaked at {peak} bytes, over the {settings.ALLOCATION_BUDGET_BYTES} budget")
    result = BenchResult(
        op=_label(f"forward[{config.input_kind.value}-{config.alpha_inner}]", threads),
        shape=(H, W, config.input_channels),
        alpha=config.alpha_inner,
        reps=reps,
        peak_bytes=peak,
        params=weights.parameter_count(),
        **summarize(times),
    )
    logger.info(f"{result.op} {result.shape_label}: median {result.median_s:.4f}s, peak {peak} bytes")
    return result
