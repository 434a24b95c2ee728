"""
Differentiable neural primitives on channels-last tensors.

Convolution is direct: one GEMM per kernel tap accumulated in a fixed order,
cut into row blocks of the output (see `parallel.run_row_blocks`). The im2col
formulation is kept next to it as a cross-check.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, ShapeError
from .parallel import run_row_blocks
from .tensor import Tensor, record
from ..models.enums import OpKind

logger = logging.getLogger(__name__)

DEFAULT_SLOPE = 0.2


@dataclass(frozen=True)
class ConvKernel:
    """Weights [kh, kw, Cin, Cout], bias [Cout] (optional), stride, zero padding."""
    weights: Tensor
    bias: Optional[Tensor] = None
    stride: int = 1
    padding: Union[int, Tuple[int, int]] = 0

    @property
    def pad_hw(self) -> Tuple[int, int]:
        if isinstance(self.padding, int):
            return self.padding, self.padding
        return self.padding

    @property
    def cin(self) -> int:
        return self.weights.dims[2]

    @property
    def cout(self) -> int:
        return self.weights.dims[3]

    def parameter_count(self) -> int:
        count = self.weights.size
        if self.bias is not None:
            count += self.bias.size
        return count


def same_kernel(weights: Tensor, bias: Optional[Tensor] = None) -> ConvKernel:
    """Stride-1 kernel padded so the spatial dims are preserved."""
    kh, kw = weights.dims[:2]
    return ConvKernel(weights=weights, bias=bias, stride=1, padding=(kh // 2, kw // 2))


def _conv_geometry(x: Tensor, k: ConvKernel) -> Tuple[int, int, int, int]:
    if x.ndim != 3:
        raise ShapeError(f"conv2d expects [H, W, C], got {x.dims}")
    if k.weights.ndim != 4:
        raise ShapeError(f"Kernel must be [kh, kw, Cin, Cout], got {k.weights.dims}")
    H, W, cin = x.dims
    kh, kw, kcin, cout = k.weights.dims
    if kcin != cin:
        raise ShapeError(f"conv2d: input has {cin} channels, kernel expects {kcin}")
    if k.bias is not None and k.bias.dims != (cout,):
        raise ShapeError(f"conv2d: bias dims {k.bias.dims} do not match Cout={cout}")
    if k.stride < 1:
        raise ShapeError(f"conv2d: stride must be >= 1, got {k.stride}")
    ph, pw = k.pad_hw
    ho = (H + 2 * ph - kh) // k.stride + 1
    wo = (W + 2 * pw - kw) // k.stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} does not fit input {H}x{W}")
    return ho, wo, kh, kw


def _pad(data: np.ndarray, ph: int, pw: int) -> np.ndarray:
    if ph == 0 and pw == 0:
        return data
    return np.pad(data, ((ph, ph), (pw, pw), (0, 0)))


def _conv_record(x: Tensor, k: ConvKernel, xp: np.ndarray, out: np.ndarray, path: str) -> Tensor:
    W = k.weights.data
    H, Wd, cin = x.dims
    kh, kw, _, cout = W.shape
    ph, pw = k.pad_hw
    s = k.stride
    ho, wo = out.shape[:2]

    def _backward(g):
        gxp = np.zeros_like(xp)
        gW = np.zeros_like(W)
        g2 = g.reshape(-1, cout)
        for u in range(kh):
            for v in range(kw):
                rows = slice(u, u + (ho - 1) * s + 1, s)
                cols = slice(v, v + (wo - 1) * s + 1, s)
                patch = xp[rows, cols, :]
                gW[u, v] = patch.reshape(-1, cin).T @ g2
                gxp[rows, cols, :] += g @ W[u, v].T
        gx = gxp[ph:ph + H, pw:pw + Wd, :]
        grads = [np.ascontiguousarray(gx), gW]
        if k.bias is not None:
            grads.append(g.sum(axis=(0, 1)))
        return grads

    inputs = [x, k.weights] + ([k.bias] if k.bias is not None else [])
    return record(OpKind.CONV2D, inputs, out, _backward, stride=s, padding=(ph, pw), path=path)


def conv2d(x: Tensor, k: ConvKernel) -> Tensor:
    """Cross-correlation with zero padding; H' = (H + 2p - kh) / stride + 1."""
    ho, wo, kh, kw = _conv_geometry(x, k)
    ph, pw = k.pad_hw
    s = k.stride
    W = k.weights.data
    xp = _pad(x.data, ph, pw)
    out = np.empty((ho, wo, k.cout), dtype=x.dtype)
    bias = k.bias.data if k.bias is not None else None

    def _rows(r0: int, r1: int) -> None:
        acc = np.zeros((r1 - r0, wo, k.cout), dtype=x.dtype)
        for u in range(kh):
            band = xp[r0 * s + u:(r1 - 1) * s + u + 1:s]
            for v in range(kw):
                acc += band[:, v:v + (wo - 1) * s + 1:s, :] @ W[u, v]
        if bias is not None:
            acc += bias
        out[r0:r1] = acc

    run_row_blocks(_rows, ho)
    return _conv_record(x, k, xp, out, path="direct")


def conv2d_im2col(x: Tensor, k: ConvKernel) -> Tensor:
    """Same contract as conv2d, computed as one GEMM over unfolded windows."""
    ho, wo, kh, kw = _conv_geometry(x, k)
    ph, pw = k.pad_hw
    s = k.stride
    xp = _pad(x.data, ph, pw)
    windows = sliding_window_view(xp, (kh, kw), axis=(0, 1))[::s, ::s]
    cols = windows[:ho, :wo].transpose(0, 1, 3, 4, 2).reshape(ho * wo, kh * kw * k.cin)
    out = cols @ k.weights.data.reshape(kh * kw * k.cin, k.cout)
    if k.bias is not None:
        out += k.bias.data
    return _conv_record(x, k, xp, out.reshape(ho, wo, k.cout).astype(x.dtype, copy=False), path="im2col")


def zero_insert(x: Tensor, alpha: int) -> Tensor:
    """Place x[y, x] at (y*alpha, x*alpha) of an (H*alpha, W*alpha) zero map."""
    if alpha < 1:
        raise ShapeError(f"zero_insert: alpha must be >= 1, got {alpha}")
    H, W, C = x.dims
    out = np.zeros((H * alpha, W * alpha, C), dtype=x.dtype)
    out[::alpha, ::alpha] = x.data
    return record(
        OpKind.ZERO_INSERT, [x], out,
        lambda g: (np.ascontiguousarray(g[::alpha, ::alpha]),),
        alpha=alpha,
    )


def transposed_conv2d(x: Tensor, k: ConvKernel, alpha: int) -> Tensor:
    """
    Fractionally-strided convolution with stride alpha.

    Output dims are ((H - 1) * alpha + kh - 2p, (W - 1) * alpha + kw - 2p).
    """
    if k.stride != alpha:
        raise ContractError(f"transposed_conv2d: stride {k.stride} must equal alpha {alpha}")
    if x.ndim != 3 or x.dims[2] != k.cin:
        raise ShapeError(f"transposed_conv2d: input {x.dims} does not match kernel Cin={k.cin}")
    H, Wd, cin = x.dims
    W = k.weights.data
    kh, kw, _, cout = W.shape
    ph, pw = k.pad_hw
    s = alpha
    full_h, full_w = (H - 1) * s + kh, (Wd - 1) * s + kw
    if full_h - 2 * ph < 1 or full_w - 2 * pw < 1:
        raise ShapeError("transposed_conv2d: padding removes the whole output")

    full = np.zeros((full_h, full_w, cout), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            full[u:u + (H - 1) * s + 1:s, v:v + (Wd - 1) * s + 1:s] += x.data @ W[u, v]
    out = full[ph:full_h - ph, pw:full_w - pw]
    if k.bias is not None:
        out = out + k.bias.data
    out = np.ascontiguousarray(out)
    xd = x.data

    def _backward(g):
        gfull = np.zeros((full_h, full_w, cout), dtype=g.dtype)
        gfull[ph:full_h - ph, pw:full_w - pw] = g
        gx = np.zeros_like(xd)
        gW = np.zeros_like(W)
        x2 = xd.reshape(-1, cin)
        for u in range(kh):
            for v in range(kw):
                gslice = gfull[u:u + (H - 1) * s + 1:s, v:v + (Wd - 1) * s + 1:s]
                gx += gslice @ W[u, v].T
                gW[u, v] = x2.T @ gslice.reshape(-1, cout)
        grads = [gx, gW]
        if k.bias is not None:
            grads.append(g.sum(axis=(0, 1)))
        return grads

    inputs = [x, k.weights] + ([k.bias] if k.bias is not None else [])
    return record(OpKind.TRANSPOSED_CONV2D, inputs, out, _backward, stride=s, padding=(ph, pw))


def interpolate_nearest(x: Tensor, alpha: int) -> Tensor:
    """Replicate every pixel into an alpha x alpha block."""
    if alpha < 1:
        raise ShapeError(f"interpolate_nearest: alpha must be >= 1, got {alpha}")
    if alpha == 1:
        return x
    H, W, C = x.dims
    out = np.repeat(np.repeat(x.data, alpha, axis=0), alpha, axis=1)
    return record(
        OpKind.INTERPOLATE, [x], out,
        lambda g: (g.reshape(H, alpha, W, alpha, C).sum(axis=(1, 3)),),
        alpha=alpha,
    )


def leaky_relu(x: Tensor, slope: float = DEFAULT_SLOPE) -> Tensor:
    """max(x, slope * x) for 0 <= slope <= 1."""
    data = x.data
    positive = data > 0
    slope_t = data.dtype.type(slope)
    out = np.where(positive, data, data * slope_t)
    return record(
        OpKind.LEAKY_RELU, [x], out,
        lambda g: (np.where(positive, g, g * slope_t),),
        slope=slope,
    )


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def linear(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """xW + b for x of dims [n] or [batch, n]."""
    if W.ndim != 2 or x.dims[-1] != W.dims[0] or b.dims != (W.dims[1],):
        raise ShapeError(f"linear: x {x.dims}, W {W.dims}, b {b.dims} do not agree")
    xd, Wd = x.data, W.data
    out = xd @ Wd + b.data

    def _backward(g):
        gx = g @ Wd.T
        if xd.ndim == 1:
            gW = np.outer(xd, g)
            gb = g
        else:
            gW = xd.T @ g
            gb = g.sum(axis=0)
        return gx, gW.astype(g.dtype, copy=False), gb

    return record(OpKind.LINEAR, [x, W, b], out, _backward)


def concat_channels(xs: Sequence[Tensor]) -> Tensor:
    """Stack along the channel axis in argument order."""
    if not xs:
        raise ShapeError("concat_channels needs at least one tensor")
    if len(xs) == 1:
        return xs[0]
    lead = xs[0].dims[:-1]
    for t in xs[1:]:
        if t.dims[:-1] != lead:
            raise ShapeError(f"concat_channels: spatial dims {t.dims[:-1]} != {lead}")
    widths = [t.dims[-1] for t in xs]
    bounds = np.cumsum([0] + widths)
    out = np.concatenate([t.data for t in xs], axis=-1)

    def _backward(g):
        return [np.ascontiguousarray(g[..., bounds[i]:bounds[i + 1]]) for i in range(len(xs))]

    return record(OpKind.CONCAT, list(xs), out, _backward, widths=widths)


def avg_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping average pooling; trailing rows/cols that do not fill a window are dropped."""
    H, W, C = x.dims
    h, w = H // size, W // size
    if h < 1 or w < 1:
        raise ShapeError(f"avg_pool2d: {H}x{W} smaller than window {size}")
    cropped = x.data[:h * size, :w * size]
    out = cropped.reshape(h, size, w, size, C).mean(axis=(1, 3)).astype(x.dtype, copy=False)
    area = x.dtype.type(size * size)

    def _backward(g):
        gx = np.zeros(x.dims, dtype=g.dtype)
        gx[:h * size, :w * size] = np.repeat(np.repeat(g / area, size, axis=0), size, axis=1)
        return (gx,)

    return record(OpKind.AVG_POOL, [x], out, _backward, size=size)


def fan_in(shape: Sequence[int]) -> int:
    if len(shape) < 2:
        raise ShapeError(f"Fan-in undefined for shape {tuple(shape)}")
    return int(np.prod(shape[:-1]))


def he_init(shape: Sequence[int], seed: Union[int, np.random.Generator]) -> Tensor:
    """Zero-mean normal samples with variance 2 / fan_in (last axis is fan-out)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    std = np.sqrt(2.0 / fan_in(shape))
    return Tensor(rng.normal(0.0, std, size=tuple(shape)).astype(np.float32))
