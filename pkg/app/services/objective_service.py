"""
Composite training loss and the PSNR / SSIM metrics.

Every norm is mean-reduced so the coefficients do not depend on image size.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core import tensor as T
from ..core.errors import ShapeError
from ..core.nnops import ConvKernel, avg_pool2d, conv2d, he_init, leaky_relu, same_kernel
from ..core.tensor import Tensor
from ..models.weights import WeightStore
from ..schemas.objective import BlurConfig, FeatureExtractorConfig, LossRecord, LossWeights

logger = logging.getLogger(__name__)

PSNR_DISPLAY_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _same_dims(a: Tensor, b: Tensor, op: str) -> None:
    if a.dims != b.dims:
        raise ShapeError(f"{op}: dims {a.dims} and {b.dims} differ")


def gaussian_1d(size: int, sigma: float) -> np.ndarray:
    """Normalised float64 Gaussian taps centred on size // 2."""
    offsets = np.arange(size, dtype=np.float64) - size // 2
    taps = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    return taps / taps.sum()


# ==================== Loss components ====================

def l1(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference."""
    _same_dims(a, b, "l1")
    return T.mean_all(T.absolute(T.sub(a, b)))


class FeatureExtractor:
    """
    Frozen convolutional pyramid: per stage a 3x3 conv, leaky rectifier and
    2x average pool. Its tensors are never put on a tape, so they receive no
    gradients.
    """

    def __init__(self, kernels: List[ConvKernel], slope: float = 0.2):
        self.kernels = kernels
        self.slope = slope

    @classmethod
    def seeded(cls, config: FeatureExtractorConfig = FeatureExtractorConfig()) -> "FeatureExtractor":
        rng = np.random.default_rng(config.seed)
        kernels = []
        cin = 3
        for cout in config.channels:
            kernels.append(same_kernel(he_init((3, 3, cin, cout), rng), T.tensor_new((cout,), 0.0)))
            cin = cout
        return cls(kernels, config.slope)

    @classmethod
    def zeros(cls, config: FeatureExtractorConfig = FeatureExtractorConfig()) -> "FeatureExtractor":
        kernels = []
        cin = 3
        for cout in config.channels:
            kernels.append(same_kernel(T.tensor_new((3, 3, cin, cout), 0.0), T.tensor_new((cout,), 0.0)))
            cin = cout
        return cls(kernels, config.slope)

    @classmethod
    def from_weights(cls, weights: WeightStore, slope: float = 0.2) -> "FeatureExtractor":
        """Load `feature/stage{i}/weight|bias` tensors, e.g. from an .llpk file."""
        kernels = []
        i = 0
        while f"feature/stage{i}/weight" in weights:
            w = weights[f"feature/stage{i}/weight"].detach()
            b = weights[f"feature/stage{i}/bias"].detach()
            kernels.append(same_kernel(w, b))
            i += 1
        if not kernels:
            raise ShapeError("No feature/stage0/weight tensor in the supplied weights")
        return cls(kernels, slope)

    def to_weights(self) -> WeightStore:
        tensors: Dict[str, Tensor] = {}
        for i, k in enumerate(self.kernels):
            tensors[f"feature/stage{i}/weight"] = k.weights
            tensors[f"feature/stage{i}/bias"] = k.bias
        return WeightStore(tensors)

    def __call__(self, x: Tensor) -> List[Tensor]:
        if x.ndim != 3 or x.dims[2] != 3:
            raise ShapeError(f"Feature extractor expects [H, W, 3], got {x.dims}")
        taps = []
        h = x
        for i, k in enumerate(self.kernels):
            h = leaky_relu(conv2d(h, k), self.slope)
            if h.dims[0] >= 2 and h.dims[1] >= 2:
                h = avg_pool2d(h, 2)
            else:
                logger.debug(f"feature stage {i}: {h.dims[0]}x{h.dims[1]} too small to pool, keeping resolution")
            taps.append(h)
        return taps


def feature_loss(a: Tensor, b: Tensor, extractor: FeatureExtractor) -> Tensor:
    """Sum over pyramid stages of the mean absolute feature difference."""
    _same_dims(a, b, "feature_loss")
    total: Optional[Tensor] = None
    for fa, fb in zip(extractor(a), extractor(b)):
        term = l1(fa, fb)
        total = term if total is None else T.add(total, term)
    return total


class GaussianBlur:
    """
    Separable Gaussian applied per channel with zero padding; every output is
    divided by the kernel mass that fell inside the image, so constants stay
    constant up to the borders.
    """

    def __init__(self, config: BlurConfig = BlurConfig()):
        self.config = config
        self.taps = gaussian_1d(config.size, config.sigma)

    @property
    def kernel_2d(self) -> np.ndarray:
        return np.outer(self.taps, self.taps)

    def _kernels(self, channels: int, dtype) -> tuple:
        size = self.config.size
        eye = np.eye(channels, dtype=dtype)
        rows = self.taps.astype(dtype)[:, None, None, None] * eye[None, None]
        cols = self.taps.astype(dtype)[None, :, None, None] * eye[None, None]
        row_kernel = ConvKernel(Tensor(rows, dtype=dtype), padding=(size // 2, 0))
        col_kernel = ConvKernel(Tensor(cols, dtype=dtype), padding=(0, size // 2))
        return row_kernel, col_kernel

    def _raw(self, x: Tensor) -> Tensor:
        row_kernel, col_kernel = self._kernels(x.dims[2], x.dtype)
        return conv2d(conv2d(x, row_kernel), col_kernel)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3:
            raise ShapeError(f"GaussianBlur expects [H, W, C], got {x.dims}")
        H, W, C = x.dims
        mass = self._raw(Tensor(np.ones((H, W, 1), dtype=x.dtype), dtype=x.dtype)).data
        inverse = np.broadcast_to(1.0 / mass, (H, W, C)).astype(x.dtype)
        return T.mul(self._raw(x), Tensor(inverse, dtype=x.dtype))


def smoothed_l1(a: Tensor, b: Tensor, blur: GaussianBlur) -> Tensor:
    _same_dims(a, b, "smoothed_l1")
    return l1(blur(a), blur(b))


def tv(a: Tensor) -> Tensor:
    """Anisotropic total variation divided by H*W*C."""
    if a.ndim != 3:
        raise ShapeError(f"tv expects [H, W, C], got {a.dims}")
    H, W, C = a.dims
    terms = []
    if H > 1:
        terms.append(T.sum_all(T.absolute(T.diff(a, axis=0))))
    if W > 1:
        terms.append(T.sum_all(T.absolute(T.diff(a, axis=1))))
    if not terms:
        return T.scale(T.sum_all(a), 0.0)
    total = terms[0] if len(terms) == 1 else T.add(terms[0], terms[1])
    return T.scale(total, 1.0 / (H * W * C))


def weight_l1(weights: WeightStore) -> Tensor:
    """Sum of |w| over every parameter."""
    total: Optional[Tensor] = None
    for _, t in weights.items():
        term = T.sum_all(T.absolute(t))
        total = term if total is None else T.add(total, term)
    if total is None:
        return T.tensor_new((1,), 0.0)
    return total


# ==================== Composite ====================

@dataclass(frozen=True)
class LossTerms:
    l1: Tensor
    feat: Tensor
    smooth: Tensor
    tv: Tensor
    wl1: Tensor
    total: Tensor

    def as_dict(self) -> Dict[str, float]:
        return {
            "total": self.total.item(),
            "l1": self.l1.item(),
            "feat": self.feat.item(),
            "smooth": self.smooth.item(),
            "tv": self.tv.item(),
            "wl1": self.wl1.item(),
        }

    def to_record(self, iteration: int) -> LossRecord:
        return LossRecord(iteration=iteration, **self.as_dict())


class Objective:
    """Holds the extractor and blur so they are built once per training run."""

    def __init__(
        self,
        weights: LossWeights = LossWeights(),
        extractor: Optional[FeatureExtractor] = None,
        blur: Optional[GaussianBlur] = None,
    ):
        self.weights = weights
        self.extractor = extractor or FeatureExtractor.seeded()
        self.blur = blur or GaussianBlur()

    def terms(self, gt: Tensor, out: Tensor, params: WeightStore) -> LossTerms:
        _same_dims(gt, out, "loss")
        lam = self.weights
        c_l1 = l1(gt, out)
        c_feat = feature_loss(gt, out, self.extractor)
        c_smooth = smoothed_l1(gt, out, self.blur)
        c_tv = tv(out)
        c_wl1 = weight_l1(params)
        total = T.scale(c_l1, lam.l1)
        total = T.add(total, T.scale(c_feat, lam.feature))
        total = T.add(total, T.scale(c_smooth, lam.smooth))
        total = T.add(total, T.scale(c_tv, lam.tv))
        total = T.add(total, T.scale(c_wl1, lam.weight))
        return LossTerms(l1=c_l1, feat=c_feat, smooth=c_smooth, tv=c_tv, wl1=c_wl1, total=total)

    def total(self, gt: Tensor, out: Tensor, params: WeightStore) -> Tensor:
        return self.terms(gt, out, params).total


def loss_terms(
    gt: Tensor,
    out: Tensor,
    params: WeightStore,
    weights: LossWeights = LossWeights(),
    extractor: Optional[FeatureExtractor] = None,
    blur: Optional[GaussianBlur] = None,
) -> LossTerms:
    return Objective(weights, extractor, blur).terms(gt, out, params)


def loss_total(
    gt: Tensor,
    out: Tensor,
    params: WeightStore,
    weights: LossWeights = LossWeights(),
    extractor: Optional[FeatureExtractor] = None,
    blur: Optional[GaussianBlur] = None,
) -> Tensor:
    return loss_terms(gt, out, params, weights, extractor, blur).total


# ==================== Metrics ====================

def psnr(a: Tensor, b: Tensor, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE); +inf for identical inputs."""
    _same_dims(a, b, "psnr")
    diff = np.asarray(a.data, dtype=np.float64) - np.asarray(b.data, dtype=np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def display_psnr(value: float) -> float:
    return min(value, PSNR_DISPLAY_CAP)


def _filter_valid(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = taps.size
    rows = sliding_window_view(x, n, axis=0) @ taps
    return sliding_window_view(rows, n, axis=1) @ taps


def ssim(a: Tensor, b: Tensor, peak: float = 1.0) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5) and channels."""
    _same_dims(a, b, "ssim")
    if a.ndim != 3:
        raise ShapeError(f"ssim expects [H, W, C], got {a.dims}")
    if a.dims[0] < SSIM_WINDOW or a.dims[1] < SSIM_WINDOW:
        raise ShapeError(f"ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.dims[:2]}")
    x = np.asarray(a.data, dtype=np.float64)
    y = np.asarray(b.data, dtype=np.float64)
    taps = gaussian_1d(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2

    mu_x = _filter_valid(x, taps)
    mu_y = _filter_valid(y, taps)
    var_x = _filter_valid(x * x, taps) - mu_x * mu_x
    var_y = _filter_valid(y * y, taps) - mu_y * mu_y
    cov = _filter_valid(x * y, taps) - mu_x * mu_y

    numerator = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))
