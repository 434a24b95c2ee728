"""
Pack / UnPack rearrangement, the PixelShuffle baseline and the Bayer split.

Pack alpha moves the pixels at offset (row, col) of every alpha x alpha block
into one channel slab; slabs are laid out in row-major (row, col) order, each
`group` channels wide:

    count = 0
    for row in range(alpha):
        for col in range(alpha):
            out[:, :, count:count + G] = x[row::alpha, col::alpha, :]
            count += G

With more than `group` input channels, each group of G channels is packed on
its own and the results are concatenated, so `group=1` packs every channel
independently (the per-colour use) and `group=C` is the RGB loop above.

All kernels are pure permutations written as one contiguous-destination copy
per row block.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError
from .nnops import ConvKernel, conv2d, same_kernel
from .parallel import run_row_blocks
from .tensor import Tensor, record
from ..models.enums import BayerPhase, OpKind, UpsampleLayout

logger = logging.getLogger(__name__)


def _check_alpha(alpha: int) -> None:
    if not isinstance(alpha, (int, np.integer)) or alpha < 1:
        raise ShapeError(f"alpha must be a positive integer, got {alpha!r}")


def _copy_rows(src: np.ndarray, out: np.ndarray) -> None:
    def _copy(r0: int, r1: int) -> None:
        out[r0:r1] = src[r0:r1]

    run_row_blocks(_copy, src.shape[0])


# ==================== Raw array kernels ====================

def _pack_array(data: np.ndarray, alpha: int, group: int) -> np.ndarray:
    H, W, C = data.shape
    h, w, n = H // alpha, W // alpha, C // group
    src = data.reshape(h, alpha, w, alpha, n, group).transpose(0, 2, 4, 1, 3, 5)
    out = np.empty((h, w, n, alpha, alpha, group), dtype=data.dtype)
    _copy_rows(src, out)
    return out.reshape(h, w, C * alpha * alpha)


def _unpack_array(data: np.ndarray, alpha: int, group: int) -> np.ndarray:
    h, w, C = data.shape
    n = C // (group * alpha * alpha)
    src = data.reshape(h, w, n, alpha, alpha, group).transpose(0, 3, 1, 4, 2, 5)
    out = np.empty((h, alpha, w, alpha, n, group), dtype=data.dtype)
    _copy_rows(src, out)
    return out.reshape(h * alpha, w * alpha, n * group)


def _pixel_shuffle_array(data: np.ndarray, alpha: int) -> np.ndarray:
    h, w, C = data.shape
    c = C // (alpha * alpha)
    src = data.reshape(h, w, c, alpha, alpha).transpose(0, 3, 1, 4, 2)
    out = np.empty((h, alpha, w, alpha, c), dtype=data.dtype)
    _copy_rows(src, out)
    return out.reshape(h * alpha, w * alpha, c)


def _pixel_unshuffle_array(data: np.ndarray, alpha: int) -> np.ndarray:
    H, W, c = data.shape
    h, w = H // alpha, W // alpha
    src = data.reshape(h, alpha, w, alpha, c).transpose(0, 2, 4, 1, 3)
    out = np.empty((h, w, c, alpha, alpha), dtype=data.dtype)
    _copy_rows(src, out)
    return out.reshape(h, w, c * alpha * alpha)


# ==================== Differentiable ops ====================

def pack(x: Tensor, alpha: int, group: int = 3) -> Tensor:
    """[H, W, C] -> [H/alpha, W/alpha, C*alpha^2]."""
    _check_alpha(alpha)
    if x.ndim != 3:
        raise ShapeError(f"pack expects [H, W, C], got {x.dims}")
    H, W, C = x.dims
    if H % alpha or W % alpha:
        raise ShapeError(f"pack: spatial dims {H}x{W} not divisible by alpha={alpha}")
    if group < 1 or C % group:
        raise ShapeError(f"pack: {C} channels not divisible by group={group}")
    if alpha == 1:
        return x
    out = _pack_array(x.data, alpha, group)
    return record(
        OpKind.PACK, [x], out,
        lambda g: (_unpack_array(g, alpha, group),),
        alpha=alpha, group=group,
    )


def unpack(x: Tensor, alpha: int, group: int = 3) -> Tensor:
    """[h, w, C*alpha^2] -> [h*alpha, w*alpha, C]; exact inverse of pack."""
    _check_alpha(alpha)
    if x.ndim != 3:
        raise ShapeError(f"unpack expects [h, w, C], got {x.dims}")
    C = x.dims[2]
    if group < 1 or C % (group * alpha * alpha):
        raise ShapeError(f"unpack: {C} channels not divisible by group*alpha^2={group * alpha * alpha}")
    if alpha == 1:
        return x
    out = _unpack_array(x.data, alpha, group)
    return record(
        OpKind.UNPACK, [x], out,
        lambda g: (_pack_array(g, alpha, group),),
        alpha=alpha, group=group,
    )


def pixel_shuffle(x: Tensor, alpha: int) -> Tensor:
    """Depth-to-space: output colour c at block offset (i, j) reads channel c*alpha^2 + i*alpha + j."""
    _check_alpha(alpha)
    if x.ndim != 3:
        raise ShapeError(f"pixel_shuffle expects [h, w, C], got {x.dims}")
    if x.dims[2] % (alpha * alpha):
        raise ShapeError(f"pixel_shuffle: {x.dims[2]} channels not divisible by alpha^2={alpha * alpha}")
    if alpha == 1:
        return x
    out = _pixel_shuffle_array(x.data, alpha)
    return record(
        OpKind.PIXEL_SHUFFLE, [x], out,
        lambda g: (_pixel_unshuffle_array(g, alpha),),
        alpha=alpha,
    )


def pixel_unshuffle(x: Tensor, alpha: int) -> Tensor:
    _check_alpha(alpha)
    if x.ndim != 3:
        raise ShapeError(f"pixel_unshuffle expects [H, W, C], got {x.dims}")
    H, W, _ = x.dims
    if H % alpha or W % alpha:
        raise ShapeError(f"pixel_unshuffle: {H}x{W} not divisible by alpha={alpha}")
    if alpha == 1:
        return x
    out = _pixel_unshuffle_array(x.data, alpha)
    return record(
        OpKind.PIXEL_UNSHUFFLE, [x], out,
        lambda g: (_pixel_shuffle_array(g, alpha),),
        alpha=alpha,
    )


def permute_channels(x: Tensor, order: Sequence[int]) -> Tensor:
    """out[..., i] = x[..., order[i]]."""
    order = np.asarray(order, dtype=np.intp)
    C = x.dims[-1]
    if order.shape != (C,) or not np.array_equal(np.sort(order), np.arange(C)):
        raise ShapeError(f"permute_channels: {order.tolist()} is not a permutation of {C} channels")
    inverse = np.argsort(order)
    out = np.ascontiguousarray(x.data[..., order])
    return record(
        OpKind.PERMUTE, [x], out,
        lambda g: (np.ascontiguousarray(g[..., inverse]),),
        order=order.tolist(),
    )


# ==================== Layout inspection ====================

def unpack_to_pixel_shuffle_permutation(channels: int, alpha: int, group: int = 3) -> np.ndarray:
    """
    Permutation P with pixel_shuffle(x[..., P], alpha) == unpack(x, alpha, group).

    `channels` is the LR channel count (a multiple of group * alpha^2).
    """
    _check_alpha(alpha)
    if channels % (group * alpha * alpha):
        raise ShapeError(f"{channels} channels not divisible by group*alpha^2")
    out_channels = channels // (alpha * alpha)
    perm = np.empty(channels, dtype=np.intp)
    for c in range(out_channels):
        gi, k = divmod(c, group)
        for i in range(alpha):
            for j in range(alpha):
                perm[c * alpha * alpha + i * alpha + j] = ((gi * alpha + i) * alpha + j) * group + k
    return perm


def channel_index(
    layout: UpsampleLayout,
    alpha: int,
    colour: int,
    offset: Tuple[int, int],
    group: int = 3,
) -> int:
    """LR channel feeding HR colour `colour` at block offset (i, j)."""
    i, j = offset
    if layout == UpsampleLayout.PIXEL_SHUFFLE:
        return colour * alpha * alpha + i * alpha + j
    gi, k = divmod(colour, group)
    return ((gi * alpha + i) * alpha + j) * group + k


# ==================== Bayer split ====================

def bayer_split(raw: Tensor, phase: BayerPhase = BayerPhase.RGGB) -> Tensor:
    """[H, W, 1] mosaic -> [H/2, W/2, 4] planes ordered (R, G1, G2, B)."""
    if raw.ndim != 3 or raw.dims[2] != 1:
        raise ShapeError(f"bayer_split expects [H, W, 1], got {raw.dims}")
    H, W, _ = raw.dims
    if H % 2 or W % 2:
        raise ShapeError(f"bayer_split: dims {H}x{W} must be even")
    planes = pack(raw, 2, group=1)
    positions = phase.positions()
    if positions == (0, 1, 2, 3):
        return planes
    return permute_channels(planes, positions)


# ==================== Sub-pixel equivalence ====================

def lr_upsample_conv(
    t_lr: Tensor,
    kernel: ConvKernel,
    alpha: int,
    group: int = 3,
    layout: UpsampleLayout = UpsampleLayout.UNPACK,
) -> Tensor:
    """LR path: one convolution producing group*alpha^2 channels, then depth-to-space."""
    o_lr = conv2d(t_lr, kernel)
    if layout == UpsampleLayout.PIXEL_SHUFFLE:
        return pixel_shuffle(o_lr, alpha)
    return unpack(o_lr, alpha, group)


def compose_hr_kernel(w_lr: np.ndarray, alpha: int, group: int = 3) -> np.ndarray:
    """
    Assemble the HR kernel [k*alpha, k*alpha, Cin, G] from an LR bank [k, k, Cin, G*alpha^2].

    Sub-kernel (i, j) of colour c is LR channel c*alpha^2 + i*alpha + j, placed
    at w_hr[a*alpha + (alpha-1-i), b*alpha + (alpha-1-j)].
    """
    k, k2, cin, channels = w_lr.shape
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"LR kernel must be square with odd size, got {w_lr.shape[:2]}")
    if channels != group * alpha * alpha:
        raise ShapeError(f"LR bank has {channels} channels, expected {group * alpha * alpha}")
    w_hr = np.zeros((k * alpha, k * alpha, cin, group), dtype=np.float64)
    for c in range(group):
        for i in range(alpha):
            for j in range(alpha):
                n = c * alpha * alpha + i * alpha + j
                for a in range(k):
                    for b in range(k):
                        w_hr[a * alpha + (alpha - 1 - i), b * alpha + (alpha - 1 - j), :, c] = w_lr[a, b, :, n]
    return w_hr


def reference_upsample_conv_hr(
    t_lr: Tensor,
    w_hr: np.ndarray,
    alpha: int,
    group: int = 3,
    bias: Optional[np.ndarray] = None,
) -> Tensor:
    """
    HR-space oracle in float64: zero-insertion upsampling, HR convolution, regrouping.

    Regrouping index map, applied inside every alpha x alpha block:
        out[y*alpha + i, x*alpha + j, c] = plain[y*alpha + i', x*alpha + j', c']
        where c'*alpha^2 + i'*alpha + j' == (i*alpha + j)*group + c
    """
    _check_alpha(alpha)
    t = np.asarray(t_lr.data, dtype=np.float64)
    h, w, cin = t.shape
    K = w_hr.shape[0]
    if w_hr.shape[1] != K or K % alpha or (K // alpha) % 2 == 0:
        raise ShapeError(f"HR kernel {w_hr.shape[:2]} must be square, k*alpha with k odd")
    if w_hr.shape[2] != cin or w_hr.shape[3] != group:
        raise ShapeError(f"HR kernel {w_hr.shape} does not match Cin={cin}, group={group}")

    Hh, Wh = h * alpha, w * alpha
    upsampled = np.zeros((Hh, Wh, cin))
    upsampled[::alpha, ::alpha] = t

    k = K // alpha
    before = (k // 2) * alpha + alpha - 1
    after = K - 1 - before
    padded = np.pad(upsampled, ((before, after), (before, after), (0, 0)))
    plain = np.zeros((Hh, Wh, group))
    for u in range(K):
        for v in range(K):
            plain += padded[u:u + Hh, v:v + Wh] @ w_hr[u, v]
    if bias is not None:
        plain += bias

    out = np.empty_like(plain)
    for i in range(alpha):
        for j in range(alpha):
            for c in range(group):
                source = (i * alpha + j) * group + c
                c_src, rest = divmod(source, alpha * alpha)
                i_src, j_src = divmod(rest, alpha)
                out[i::alpha, j::alpha, c] = plain[i_src::alpha, j_src::alpha, c_src]
    return Tensor(out, dtype=np.float64)
