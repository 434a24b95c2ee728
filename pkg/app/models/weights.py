"""
Named parameter store and the `.llpk` weight container.

Container layout (little-endian):

    b"LLPK"  u32 version  u32 count
    count x record:
        u16 name_len  name (UTF-8)  u8 rank  rank x u32 dims  u8 dtype  payload
    u32 CRC32 of every record byte

Only dtype tag 0 (float32) is defined.
"""
import logging
import struct
import zlib
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..core.errors import FormatError, WeightError
from ..core.tensor import MAX_RANK, Tape, Tensor

logger = logging.getLogger(__name__)

MAGIC = b"LLPK"
VERSION = 1
DTYPE_F32 = 0

_HEADER = struct.Struct("<4sII")
_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")

ArrayLike = Union[Tensor, np.ndarray]


class WeightStore:
    """
    Ordered mapping from parameter name to tensor.

    Names are path-like (`trunk/block0/layer3/weight`). The store itself is
    never mutated once built; training produces a new store per step.
    """

    __hash__ = None

    def __init__(self, tensors: Optional[Mapping[str, ArrayLike]] = None):
        self._tensors: Dict[str, Tensor] = {}
        for name, value in (tensors or {}).items():
            if not name:
                raise WeightError("Parameter names must be non-empty")
            self._tensors[name] = value if isinstance(value, Tensor) else Tensor(value)

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise WeightError(f"Missing weight {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if list(self._tensors) != list(other._tensors):
            return False
        return all(
            a.dtype == b.dtype and np.array_equal(a.data, b.data)
            for a, b in zip(self._tensors.values(), other._tensors.values())
        )

    def __repr__(self) -> str:
        return f"WeightStore({len(self)} tensors, {self.parameter_count()} parameters)"

    def names(self) -> List[str]:
        return list(self._tensors)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._tensors.items())

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data for name, t in self._tensors.items()}

    def parameter_count(self) -> int:
        return sum(t.size for t in self._tensors.values())

    def subset(self, prefix: str) -> "WeightStore":
        return WeightStore({n: t for n, t in self._tensors.items() if n.startswith(prefix)})

    def replace(self, updates: Mapping[str, ArrayLike]) -> "WeightStore":
        """New store with some tensors replaced; names keep their order."""
        unknown = [n for n in updates if n not in self._tensors]
        if unknown:
            raise WeightError(f"Cannot replace unknown weights: {', '.join(unknown)}")
        merged: Dict[str, ArrayLike] = dict(self._tensors)
        merged.update(updates)
        return WeightStore(merged)

    def detach(self) -> "WeightStore":
        return WeightStore({n: t.detach() for n, t in self._tensors.items()})

    def watch(self, tape: Tape) -> "WeightStore":
        """Copy whose tensors are requires-grad leaves on `tape`."""
        return WeightStore({n: tape.watch(t, name=n) for n, t in self._tensors.items()})

    def gradients(self) -> Dict[str, np.ndarray]:
        """Per-name gradients after backward() on a watched store (zeros if unused)."""
        grads = {}
        for name, t in self._tensors.items():
            g = t.grad
            grads[name] = g if g is not None else np.zeros(t.dims, dtype=t.dtype)
        return grads

    def check_shapes(self, expected: Mapping[str, Tuple[int, ...]]) -> None:
        """Raise WeightError unless every expected name is present with its shape."""
        for name, dims in expected.items():
            if name not in self._tensors:
                raise WeightError(f"Missing weight {name!r}")
            if self._tensors[name].dims != tuple(dims):
                raise WeightError(
                    f"Weight {name!r} has dims {self._tensors[name].dims}, expected {tuple(dims)}"
                )
        extra = [n for n in self._tensors if n not in expected]
        if extra:
            raise WeightError(f"Unexpected weights: {', '.join(extra[:5])}")


# ==================== Container encoding ====================

def encode_weights(store: WeightStore) -> bytes:
    records = bytearray()
    for name, tensor in store.items():
        raw_name = name.encode("utf-8")
        if len(raw_name) > 0xFFFF:
            raise WeightError(f"Weight name too long: {name[:40]}...")
        records += _U16.pack(len(raw_name)) + raw_name
        records += _U8.pack(tensor.ndim)
        for d in tensor.dims:
            records += _U32.pack(d)
        records += _U8.pack(DTYPE_F32)
        records += np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    header = _HEADER.pack(MAGIC, VERSION, len(store))
    return header + bytes(records) + _U32.pack(zlib.crc32(records) & 0xFFFFFFFF)


class _Cursor:
    def __init__(self, buf: bytes, start: int = 0):
        self.buf = buf
        self.pos = start

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"Truncated container while reading {what}", offset=self.pos)
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct, what: str) -> int:
        return fmt.unpack(self.take(fmt.size, what))[0]


def decode_weights(buf: bytes) -> WeightStore:
    if len(buf) < _HEADER.size:
        raise FormatError("Truncated container header", offset=len(buf))
    magic, version, count = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"Bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"Unsupported container version {version}", offset=4)

    cursor = _Cursor(buf, _HEADER.size)
    records_start = cursor.pos
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        record_at = cursor.pos
        name_len = cursor.unpack(_U16, "name length")
        name_at = cursor.pos
        try:
            name = cursor.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("Weight name is not valid UTF-8", offset=name_at) from None
        if not name or name in tensors:
            raise FormatError(f"Empty or duplicate weight name {name!r}", offset=record_at)
        rank_at = cursor.pos
        rank = cursor.unpack(_U8, "rank")
        if not 1 <= rank <= MAX_RANK:
            raise FormatError(f"Rank {rank} outside 1..{MAX_RANK}", offset=rank_at)
        dims = tuple(cursor.unpack(_U32, "dims") for _ in range(rank))
        if any(d == 0 for d in dims):
            raise FormatError(f"Zero dimension in {dims}", offset=rank_at + 1)
        dtype_at = cursor.pos
        tag = cursor.unpack(_U8, "dtype tag")
        if tag != DTYPE_F32:
            raise FormatError(f"Unknown dtype tag {tag}", offset=dtype_at)
        nbytes = int(np.prod(dims)) * 4
        payload = cursor.take(nbytes, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)

    records_end = cursor.pos
    crc_at = cursor.pos
    stored_crc = cursor.unpack(_U32, "checksum")
    actual_crc = zlib.crc32(buf[records_start:records_end]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(f"Checksum mismatch ({stored_crc:#010x} != {actual_crc:#010x})", offset=crc_at)
    if cursor.pos != len(buf):
        raise FormatError(f"{len(buf) - cursor.pos} trailing bytes after checksum", offset=cursor.pos)
    return WeightStore(tensors)


def save_weights(store: WeightStore, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_weights(store))
    logger.info(f"Saved {len(store)} tensors ({store.parameter_count()} parameters) to {path}")


def load_weights(path: Union[str, Path]) -> WeightStore:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"Cannot read weights {path}: {exc.strerror}") from exc
    store = decode_weights(buf)
    logger.debug(f"Loaded {len(store)} tensors from {path}")
    return store
