"""
Dense tensor value type and the reverse-mode differentiation tape.

Layout is channels-last, row-major: (H, W, C) with an optional leading batch
axis. Values are float32 unless a caller explicitly asks for float64 (gradient
checks and oracles do); every op preserves the dtype of its inputs.

A `Tape` records the ops applied to tensors that were registered with
`Tape.watch`. Ops on tensors that carry no tape are computed directly and
nothing is recorded, which is the inference path.
"""
import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union
import weakref

import numpy as np

from .errors import ContractError, ShapeError
from ..models.enums import OpKind

logger = logging.getLogger(__name__)

MAX_RANK = 4
_FLOAT_TYPES = (np.float32, np.float64)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


# ==================== Allocation tracking ====================

class AllocationTracker:
    """Live/peak byte counters for memory owned by tensors."""

    def __init__(self):
        self._lock = threading.Lock()
        self.live_bytes = 0
        self.peak_bytes = 0

    def allocate(self, nbytes: int) -> None:
        with self._lock:
            self.live_bytes += nbytes
            if self.live_bytes > self.peak_bytes:
                self.peak_bytes = self.live_bytes

    def release(self, nbytes: int) -> None:
        with self._lock:
            self.live_bytes -= nbytes

    def reset_peak(self) -> None:
        with self._lock:
            self.peak_bytes = self.live_bytes


allocations = AllocationTracker()


@dataclass
class AllocationStats:
    baseline_bytes: int = 0
    peak_bytes: int = 0


@contextmanager
def track_allocations() -> Iterator[AllocationStats]:
    """Measure the tracked peak while the block runs (baseline included)."""
    allocations.reset_peak()
    stats = AllocationStats(baseline_bytes=allocations.live_bytes)
    try:
        yield stats
    finally:
        stats.peak_bytes = allocations.peak_bytes


# ==================== Tensor ====================

class Tensor:
    """Immutable dense array plus its (optional) position on a tape."""

    __slots__ = ("data", "tape", "node_id", "__weakref__")

    def __init__(
        self,
        data: Union[np.ndarray, Sequence[float], float],
        dtype: Optional[Any] = None,
        *,
        tape: Optional["Tape"] = None,
        node_id: Optional[int] = None,
    ):
        array = np.asarray(data, dtype=dtype if dtype is not None else np.float32)
        if array.dtype.type not in _FLOAT_TYPES:
            array = array.astype(np.float32)
        if array.ndim == 0:
            array = array.reshape(1)
        if array.ndim > MAX_RANK:
            raise ShapeError(f"Tensor rank {array.ndim} exceeds {MAX_RANK}")
        if array.size == 0:
            raise ShapeError(f"Tensor dims must be positive, got {array.shape}")
        owns_memory = array.base is None
        frozen = array.view()
        frozen.flags.writeable = False
        self.data = frozen
        self.tape = tape
        self.node_id = node_id
        if owns_memory:
            allocations.allocate(array.nbytes)
            weakref.finalize(self, allocations.release, array.nbytes)

    @classmethod
    def wrap(cls, array: np.ndarray) -> "Tensor":
        """Wrap an op result, keeping its dtype."""
        return cls(array, dtype=array.dtype)

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.data.shape

    shape = dims

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def requires_grad(self) -> bool:
        return self.tape is not None and self.tape.nodes[self.node_id].requires_grad

    @property
    def grad(self) -> Optional[np.ndarray]:
        if self.tape is None:
            return None
        return self.tape.nodes[self.node_id].grad

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single element, tensor has {self.size}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor.wrap(self.data)

    def __repr__(self) -> str:
        taped = f", node={self.node_id}" if self.tape is not None else ""
        return f"Tensor(dims={self.dims}, dtype={self.dtype.name}{taped})"


def tensor_new(
    dims: Sequence[int],
    fill: Union[float, Sequence[float], np.ndarray] = 0.0,
    dtype: Any = np.float32,
) -> Tensor:
    """
    New tensor of the given dims.

    `fill` is either a scalar broadcast to every element or a flat sequence of
    exactly prod(dims) values laid out row-major, channels-last.
    """
    dims = tuple(int(d) for d in dims)
    if not 1 <= len(dims) <= MAX_RANK:
        raise ShapeError(f"Rank must be 1..{MAX_RANK}, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ShapeError(f"All dims must be >= 1, got {dims}")
    if np.ndim(fill) == 0:
        return Tensor(np.full(dims, fill, dtype=dtype), dtype=dtype)
    values = np.asarray(fill, dtype=dtype).reshape(-1)
    expected = int(np.prod(dims))
    if values.size != expected:
        raise ShapeError(f"Fill has {values.size} values, dims {dims} need {expected}")
    return Tensor(values.reshape(dims).copy(), dtype=dtype)


# ==================== Tape ====================

@dataclass
class TapeNode:
    id: int
    op: OpKind
    parent_ids: Tuple[int, ...]
    dims: Tuple[int, ...]
    requires_grad: bool
    slots: Tuple[Optional[int], ...] = ()
    backward_fn: Optional[BackwardFn] = None
    context: Dict[str, Any] = field(default_factory=dict)
    grad: Optional[np.ndarray] = None


class Tape:
    """
    Topologically ordered record of differentiable ops.

    A tape has a single writer. Node ids are list positions, so every parent
    id is smaller than the id of the node that consumes it.
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def watch(self, value: Union[Tensor, np.ndarray], name: Optional[str] = None) -> Tensor:
        """Register a requires-grad leaf holding `value`."""
        array = value.data if isinstance(value, Tensor) else np.asarray(value, dtype=np.float32)
        node = TapeNode(
            id=len(self.nodes),
            op=OpKind.LEAF,
            parent_ids=(),
            dims=array.shape,
            requires_grad=True,
            context={"name": name} if name else {},
        )
        self.nodes.append(node)
        return Tensor(array, dtype=array.dtype, tape=self, node_id=node.id)

    def record(
        self,
        op: OpKind,
        inputs: Sequence[Tensor],
        value: np.ndarray,
        backward_fn: BackwardFn,
        **context: Any,
    ) -> Tensor:
        slots = tuple(t.node_id if t.tape is self else None for t in inputs)
        parent_ids = tuple(s for s in slots if s is not None)
        node = TapeNode(
            id=len(self.nodes),
            op=op,
            parent_ids=parent_ids,
            dims=value.shape,
            requires_grad=True,
            slots=slots,
            backward_fn=backward_fn,
            context=context,
        )
        self.nodes.append(node)
        return Tensor(value, dtype=value.dtype, tape=self, node_id=node.id)

    def backward(self, root: Tensor) -> Dict[int, np.ndarray]:
        """
        Accumulate d(root)/d(node) into every node; return the leaf gradients.

        Gradients sum when a node feeds several consumers.
        """
        if root.tape is not self:
            raise ContractError("Root tensor is not recorded on this tape")
        if root.size != 1:
            raise ContractError(f"backward() needs a scalar root, got dims {root.dims}")

        for node in self.nodes:
            node.grad = None
        self.nodes[root.node_id].grad = np.ones(root.dims, dtype=root.dtype)

        for node in reversed(self.nodes[: root.node_id + 1]):
            if node.grad is None or node.backward_fn is None:
                continue
            parent_grads = node.backward_fn(node.grad)
            for slot, pgrad in zip(node.slots, parent_grads):
                if slot is None or pgrad is None:
                    continue
                parent = self.nodes[slot]
                if pgrad.shape != parent.dims:
                    raise ContractError(
                        f"{node.op.value} produced grad {pgrad.shape} for parent {parent.dims}"
                    )
                if parent.grad is None:
                    parent.grad = np.array(pgrad, copy=True)
                else:
                    parent.grad = parent.grad + pgrad

        leaves = {}
        for node in self.nodes:
            if node.op == OpKind.LEAF:
                leaves[node.id] = node.grad if node.grad is not None else np.zeros(node.dims, np.float32)
        return leaves


def backward(tape: Tape, root: Tensor) -> Dict[int, np.ndarray]:
    return tape.backward(root)


def record(
    op: OpKind,
    inputs: Sequence[Tensor],
    value: np.ndarray,
    backward_fn: BackwardFn,
    **context: Any,
) -> Tensor:
    """Record `value` on the inputs' tape, or return it untaped."""
    tape = None
    for t in inputs:
        if t.tape is not None:
            if tape is not None and t.tape is not tape:
                raise ContractError("Inputs are recorded on different tapes")
            tape = t.tape
    if tape is None:
        return Tensor.wrap(value)
    return tape.record(op, inputs, value, backward_fn, **context)


def _same_dims(a: Tensor, b: Tensor, op: str) -> None:
    if a.dims != b.dims:
        raise ShapeError(f"{op}: dims {a.dims} and {b.dims} differ")


# ==================== Elementwise arithmetic ====================

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_dims(a, b, "add")
    return record(OpKind.ADD, [a, b], a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_dims(a, b, "sub")
    return record(OpKind.SUB, [a, b], a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_dims(a, b, "mul")
    x, y = a.data, b.data
    return record(OpKind.MUL, [a, b], x * y, lambda g: (g * y, g * x))


def scale(a: Tensor, factor: float) -> Tensor:
    factor = a.dtype.type(factor)
    return record(OpKind.SCALE, [a], a.data * factor, lambda g: (g * factor,), factor=float(factor))


def mul_scalar(x: Tensor, s: Tensor) -> Tensor:
    """x times a single-element tensor; the gradient reaches both."""
    if s.size != 1:
        raise ShapeError(f"mul_scalar: factor must have one element, got {s.dims}")
    sv = s.data.reshape(-1)[0]
    xv = x.data

    def _backward(g):
        return g * sv, np.asarray(np.sum(g * xv), dtype=s.dtype).reshape(s.dims)

    return record(OpKind.MUL_SCALAR, [x, s], xv * sv, _backward)


def absolute(a: Tensor) -> Tensor:
    x = a.data
    return record(OpKind.ABS, [a], np.abs(x), lambda g: (g * np.sign(x),))


def square(a: Tensor) -> Tensor:
    x = a.data
    return record(OpKind.SQUARE, [a], x * x, lambda g: (g * 2 * x,))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return record(OpKind.EXP, [a], y, lambda g: (g * y,))


def clamp(a: Tensor, lo: Optional[float] = None, hi: Optional[float] = None) -> Tensor:
    """Clip to [lo, hi]; the gradient passes where lo <= x <= hi."""
    x = a.data
    y = np.clip(x, lo, hi)
    inside = np.ones_like(x, dtype=bool)
    if lo is not None:
        inside &= x >= lo
    if hi is not None:
        inside &= x <= hi
    return record(OpKind.CLAMP, [a], y, lambda g: (np.where(inside, g, 0).astype(g.dtype),), lo=lo, hi=hi)


# ==================== Reductions and shape ops ====================

def sum_all(a: Tensor) -> Tensor:
    dims = a.dims
    total = np.asarray(np.sum(a.data), dtype=a.dtype).reshape(1)
    return record(OpKind.SUM, [a], total, lambda g: (np.full(dims, g[0], dtype=g.dtype),))


def mean_all(a: Tensor) -> Tensor:
    dims, n = a.dims, a.size
    value = np.asarray(np.sum(a.data) / n, dtype=a.dtype).reshape(1)
    return record(OpKind.MEAN, [a], value, lambda g: (np.full(dims, g[0] / n, dtype=g.dtype),))


def diff(a: Tensor, axis: int) -> Tensor:
    """Forward difference x[i+1] - x[i] along `axis`."""
    x = a.data
    if x.shape[axis] < 2:
        raise ShapeError(f"diff: axis {axis} of {x.shape} has fewer than 2 entries")
    y = np.diff(x, axis=axis)

    def _backward(g):
        gx = np.zeros_like(x)
        head = [slice(None)] * x.ndim
        tail = [slice(None)] * x.ndim
        head[axis] = slice(1, None)
        tail[axis] = slice(None, -1)
        gx[tuple(head)] += g
        gx[tuple(tail)] -= g
        return (gx,)

    return record(OpKind.DIFF, [a], y, _backward, axis=axis)


def slice_channels(a: Tensor, start: int, stop: int) -> Tensor:
    x = a.data
    channels = x.shape[-1]
    if not 0 <= start < stop <= channels:
        raise ShapeError(f"slice_channels: [{start}, {stop}) outside {channels} channels")
    y = np.ascontiguousarray(x[..., start:stop])

    def _backward(g):
        gx = np.zeros_like(x)
        gx[..., start:stop] = g
        return (gx,)

    return record(OpKind.SLICE, [a], y, _backward, start=start, stop=stop)


def reshape(a: Tensor, dims: Sequence[int]) -> Tensor:
    src = a.dims
    try:
        y = a.data.reshape(tuple(dims))
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {src} as {tuple(dims)}") from exc
    return record(OpKind.RESHAPE, [a], np.ascontiguousarray(y), lambda g: (g.reshape(src),))
