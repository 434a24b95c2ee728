"""
Netpbm image I/O, sensor normalisation and the synthetic paired dataset.

Dataset layout:

    <root>/manifest.json
    <root>/pairs/<id>/dark.pgm   (bayer-raw, 16-bit P5, ADU)
    <root>/pairs/<id>/dark.ppm   (rgb, 16-bit P6)
    <root>/pairs/<id>/gt.ppm     (8-bit P6)
    <root>/pairs/<id>/meta.json  (black, white, phase, k, input_kind)
"""
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..core.config import settings
from ..core.errors import DomainError, FormatError, ShapeError
from ..core.tensor import Tensor
from ..models.enums import BayerPhase, InputKind
from ..schemas.base import describe_validation_error
from ..schemas.dataset import DatasetManifest, NoiseModel, PairMeta

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
Seed = Union[int, Sequence[int]]

MANIFEST_NAME = "manifest.json"
PAIRS_DIR = "pairs"


# ==================== Types ====================

@dataclass(frozen=True)
class BayerImage:
    """Normalised mosaic: (ADU - black) / (white - black), clamped to [0, 1]."""
    data: Tensor
    black: int
    white: int
    phase: BayerPhase = BayerPhase.RGGB

    def __post_init__(self):
        H, W = self.data.dims[:2]
        if H % 2 or W % 2:
            raise ShapeError(f"Bayer image dims {H}x{W} must be even")


@dataclass(frozen=True)
class PairedSample:
    dark: Tensor                # [H, W, 1] mosaic or [H, W, 3] RGB, normalised
    gt: Tensor                  # [H, W, 3] in [0, 1]
    k: float                    # exposure ratio gt / dark
    input_kind: InputKind = InputKind.BAYER_RAW
    phase: BayerPhase = BayerPhase.RGGB
    origin: Tuple[int, int] = (0, 0)

    @property
    def dims(self) -> Tuple[int, int]:
        return self.gt.dims[0], self.gt.dims[1]


# ==================== Netpbm ====================

def _parse_header(buf: bytes, magic: bytes) -> Tuple[int, int, int, int]:
    """(width, height, maxval, payload offset) of a binary netpbm file."""
    if buf[:2] != magic:
        raise FormatError(f"Expected {magic.decode()} magic, got {buf[:2]!r}", offset=0)
    pos = 2
    values = []
    while len(values) < 3:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and buf[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError("Malformed header field", offset=start)
        values.append(int(buf[start:pos]))
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise FormatError("Header must end with a single whitespace byte", offset=pos)
    width, height, maxval = values
    if width < 1 or height < 1:
        raise FormatError(f"Image dims {width}x{height} must be positive", offset=2)
    if not 255 <= maxval <= 65535:
        raise FormatError(f"maxval {maxval} outside [255, 65535]", offset=2)
    return width, height, maxval, pos + 1


def _read_samples(path: PathLike, magic: bytes, channels: int) -> Tuple[np.ndarray, int]:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"Cannot read {path}: {exc.strerror}") from exc
    width, height, maxval, offset = _parse_header(buf, magic)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * channels * dtype.itemsize
    if len(buf) - offset < expected:
        raise FormatError(
            f"Truncated payload: need {expected} bytes, have {len(buf) - offset}",
            offset=len(buf),
        )
    samples = np.frombuffer(buf, dtype=dtype, count=width * height * channels, offset=offset)
    return samples.reshape(height, width, channels).astype(np.float64), maxval


def _write_samples(path: PathLike, magic: bytes, samples: np.ndarray, maxval: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = samples.shape[:2]
    dtype = ">u2" if maxval > 255 else "u1"
    header = b"%s\n%d %d\n%d\n" % (magic, width, height, maxval)
    path.write_bytes(header + np.ascontiguousarray(samples, dtype=dtype).tobytes())


def _check_unit_range(img: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise DomainError(f"{what} values must lie in [0, 1]")


def normalize_adu(adu: np.ndarray, black: int, white: int) -> np.ndarray:
    return np.clip((adu - black) / float(white - black), 0.0, 1.0).astype(np.float32)


def to_adu(values: np.ndarray, black: int, white: int) -> np.ndarray:
    adu = np.floor(np.asarray(values, dtype=np.float64) * (white - black) + black + 0.5)
    return np.clip(adu, 0, 65535).astype(np.uint16)


def read_bayer_pgm(
    path: PathLike,
    black: int = settings.DEFAULT_BLACK_LEVEL,
    white: int = settings.DEFAULT_WHITE_LEVEL,
    phase: BayerPhase = BayerPhase.RGGB,
) -> BayerImage:
    if white <= black:
        raise DomainError(f"white level {white} must exceed black level {black}")
    adu, _ = _read_samples(path, b"P5", 1)
    return BayerImage(data=Tensor(normalize_adu(adu, black, white)), black=black, white=white, phase=phase)


def write_bayer_pgm(
    path: PathLike,
    data: Tensor,
    black: int = settings.DEFAULT_BLACK_LEVEL,
    white: int = settings.DEFAULT_WHITE_LEVEL,
) -> None:
    """16-bit P5 holding round(v * (white - black) + black) ADU."""
    img = np.asarray(data.data, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 1:
        raise ShapeError(f"Bayer data must be [H, W, 1], got {img.shape}")
    _check_unit_range(img, "Bayer")
    _write_samples(path, b"P5", to_adu(img, black, white), max(white, 256))


def read_ppm(path: PathLike) -> Tensor:
    """8- or 16-bit P6 scaled to [0, 1]."""
    samples, maxval = _read_samples(path, b"P6", 3)
    return Tensor(samples / maxval)


def write_rgb(path: PathLike, img: Tensor) -> None:
    """8-bit P6, v -> floor(v * 255 + 0.5)."""
    data = np.asarray(img.data, dtype=np.float64)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ShapeError(f"RGB image must be [H, W, 3], got {data.shape}")
    _check_unit_range(data, "RGB")
    _write_samples(path, b"P6", np.floor(data * 255.0 + 0.5).astype(np.uint8), 255)


def write_rgb16(path: PathLike, img: Tensor) -> None:
    data = np.asarray(img.data, dtype=np.float64)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ShapeError(f"RGB image must be [H, W, 3], got {data.shape}")
    _check_unit_range(data, "RGB")
    _write_samples(path, b"P6", np.floor(data * 65535.0 + 0.5).astype(np.uint16), 65535)


def read_image(
    path: PathLike,
    black: int = settings.DEFAULT_BLACK_LEVEL,
    white: int = settings.DEFAULT_WHITE_LEVEL,
    phase: BayerPhase = BayerPhase.RGGB,
) -> Tuple[Tensor, InputKind]:
    """Dispatch on the netpbm magic: P5 -> normalised mosaic, P6 -> RGB."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            magic = fh.read(2)
    except OSError as exc:
        raise FormatError(f"Cannot read {path}: {exc.strerror}") from exc
    if magic == b"P5":
        return read_bayer_pgm(path, black, white, phase).data, InputKind.BAYER_RAW
    if magic == b"P6":
        return read_ppm(path), InputKind.RGB
    raise FormatError(f"{path} is neither P5 nor P6 (magic {magic!r})", offset=0)


# ==================== Synthesis ====================

def mosaic(rgb: Tensor, phase: BayerPhase = BayerPhase.RGGB) -> Tensor:
    """Keep one colour per pixel following the 2x2 phase pattern."""
    if rgb.ndim != 3 or rgb.dims[2] != 3:
        raise ShapeError(f"mosaic expects [H, W, 3], got {rgb.dims}")
    H, W, _ = rgb.dims
    if H % 2 or W % 2:
        raise ShapeError(f"mosaic: dims {H}x{W} must be even")
    cell = np.array([[phase.colour_at(r, c) for c in range(2)] for r in range(2)])
    colour = np.tile(cell, (H // 2, W // 2))
    rows, cols = np.indices((H, W))
    return Tensor(rgb.data[rows, cols, colour][..., None], dtype=rgb.dtype)


def generate_scene(height: int, width: int, seed: Seed = 0, mean_level: float = 0.4) -> Tensor:
    """Smooth random RGB scene with mean brightness `mean_level`."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij")
    scene = np.zeros((height, width, 3))
    for c in range(3):
        for _ in range(4):
            fy, fx = rng.uniform(0.5, 4.0, size=2)
            phase = rng.uniform(0.0, 2 * np.pi)
            scene[..., c] += rng.uniform(0.2, 1.0) * np.cos(2 * np.pi * (fy * yy + fx * xx) + phase)
        for _ in range(2):
            cy, cx = rng.uniform(0.0, 1.0, size=2)
            radius = rng.uniform(0.05, 0.25)
            scene[..., c] += rng.uniform(0.5, 1.5) * ((yy - cy) ** 2 + (xx - cx) ** 2 < radius ** 2)
    scene -= scene.min()
    peak = scene.max()
    if peak > 0:
        scene /= peak
    mean = scene.mean()
    if mean > 0:
        scene *= mean_level / mean
    return Tensor(np.clip(scene, 0.0, 1.0))


def synthesize_pair(
    clean_rgb: Tensor,
    k: float,
    noise: NoiseModel = NoiseModel(),
    seed: Seed = 0,
    input_kind: InputKind = InputKind.BAYER_RAW,
    phase: BayerPhase = BayerPhase.RGGB,
) -> PairedSample:
    """
    dark = clamp(signal + N(0, read_sigma^2 + shot_gain * signal), 0, 1) with
    signal = mosaic(clean) / k (or clean / k for rgb inputs).
    """
    if k < 1.0:
        raise DomainError(f"Exposure ratio k must be >= 1, got {k}")
    if input_kind == InputKind.BAYER_RAW:
        source = mosaic(clean_rgb, phase).data
    else:
        source = clean_rgb.data
    signal = np.asarray(source, dtype=np.float64) / k
    variance = noise.read_sigma ** 2 + noise.shot_gain * signal
    if np.any(variance > 0):
        rng = np.random.default_rng(seed)
        signal = signal + rng.standard_normal(signal.shape) * np.sqrt(variance)
    dark = np.clip(signal, 0.0, 1.0)
    return PairedSample(
        dark=Tensor(dark),
        gt=clean_rgb,
        k=float(k),
        input_kind=input_kind,
        phase=phase,
    )


def sample_patch(pair: PairedSample, size: int = 512, seed: Seed = 0) -> PairedSample:
    """Crop dark and GT at the same even-aligned origin."""
    H, W = pair.dims
    if H < size or W < size:
        raise ShapeError(f"Image {H}x{W} smaller than patch {size}")
    rng = np.random.default_rng(seed)
    y = 2 * int(rng.integers(0, (H - size) // 2 + 1))
    x = 2 * int(rng.integers(0, (W - size) // 2 + 1))
    dark = Tensor.wrap(np.ascontiguousarray(pair.dark.data[y:y + size, x:x + size]))
    gt = Tensor.wrap(np.ascontiguousarray(pair.gt.data[y:y + size, x:x + size]))
    return replace(pair, dark=dark, gt=gt, origin=(y, x))


# ==================== Dataset directories ====================

def _pair_dir(root: Path, pair_id: str) -> Path:
    return root / PAIRS_DIR / pair_id


def write_dataset(
    root: PathLike,
    count: int,
    height: int = 64,
    width: int = 64,
    factors: Sequence[float] = (50.0, 100.0, 250.0),
    seed: int = 0,
    noise: NoiseModel = NoiseModel(),
    input_kind: InputKind = InputKind.BAYER_RAW,
    phase: BayerPhase = BayerPhase.RGGB,
    black: int = settings.DEFAULT_BLACK_LEVEL,
    white: int = settings.DEFAULT_WHITE_LEVEL,
) -> DatasetManifest:
    """Generate `count` pairs; pair i uses factor factors[i % len(factors)]."""
    if count > 0 and not factors:
        raise DomainError("At least one exposure factor is needed")
    root = Path(root)
    (root / PAIRS_DIR).mkdir(parents=True, exist_ok=True)
    ids: List[str] = []
    for i in range(count):
        pair_id = f"{i:05d}"
        k = float(factors[i % len(factors)])
        scene = generate_scene(height, width, seed=(seed, i))
        pair = synthesize_pair(scene, k, noise, seed=(seed, i, 1), input_kind=input_kind, phase=phase)
        target = _pair_dir(root, pair_id)
        target.mkdir(parents=True, exist_ok=True)
        if input_kind == InputKind.BAYER_RAW:
            write_bayer_pgm(target / "dark.pgm", pair.dark, black, white)
        else:
            write_rgb16(target / "dark.ppm", pair.dark)
        write_rgb(target / "gt.ppm", pair.gt)
        meta = PairMeta(black=black, white=white, phase=phase, k=k, input_kind=input_kind)
        (target / "meta.json").write_text(meta.model_dump_json(indent=2))
        ids.append(pair_id)

    manifest = DatasetManifest(
        count=count,
        ids=ids,
        input_kind=input_kind,
        height=height,
        width=width,
        factors=[float(f) for f in factors],
        seed=seed,
        noise=noise,
    )
    (root / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2))
    logger.info(f"Wrote {count} {input_kind.value} pairs of {height}x{width} to {root}")
    return manifest


def _load_json_model(path: Path, model):
    try:
        return model.model_validate_json(path.read_text())
    except OSError as exc:
        raise FormatError(f"Cannot read {path}: {exc.strerror}") from exc
    except ValidationError as exc:
        raise FormatError(f"Invalid {path.name}: {describe_validation_error(exc)}") from exc


def load_manifest(root: PathLike) -> DatasetManifest:
    return _load_json_model(Path(root) / MANIFEST_NAME, DatasetManifest)


def load_pair(root: PathLike, pair_id: str) -> PairedSample:
    target = _pair_dir(Path(root), pair_id)
    meta: PairMeta = _load_json_model(target / "meta.json", PairMeta)
    if meta.input_kind == InputKind.BAYER_RAW:
        dark = read_bayer_pgm(target / "dark.pgm", meta.black, meta.white, meta.phase).data
    else:
        dark = read_ppm(target / "dark.ppm")
    gt = read_ppm(target / "gt.ppm")
    if dark.dims[:2] != gt.dims[:2]:
        raise ShapeError(f"Pair {pair_id}: dark {dark.dims} and gt {gt.dims} differ in size")
    return PairedSample(dark=dark, gt=gt, k=meta.k, input_kind=meta.input_kind, phase=meta.phase)


def load_dataset(root: PathLike, limit: Optional[int] = None) -> List[PairedSample]:
    manifest = load_manifest(root)
    ids = manifest.ids if limit is None else manifest.ids[:limit]
    pairs = [load_pair(root, pair_id) for pair_id in ids]
    logger.info(f"Loaded {len(pairs)} pairs from {root}")
    return pairs
