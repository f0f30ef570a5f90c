"""Dense tensors and the define-by-run gradient tape.

Every differentiable operation records a :class:`TapeEntry` on the active
:class:`GradientTape`. :func:`backward` replays the entries in reverse order,
accumulating one gradient contribution per use of each node.

Outside an explicit tape, operations record on an implicit tape owned by the
graph itself: it is referenced only by that graph's tensors, so a forward pass
that is never backpropagated is released together with its outputs.
"""
import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.error_handler import InputError, ShapeError

_DTYPES = {32: np.float32, 64: np.float64}
_node_ids = itertools.count(1)
_state = threading.local()

# op name -> grad transform, consulted by the tape; used by gradcheck fault injection
_backward_faults: Dict[str, Callable[[np.ndarray], np.ndarray]] = {}


def _thread_state():
    if not hasattr(_state, 'dtype'):
        _state.dtype = np.float64
        _state.grad_enabled = True
        _state.tapes = []
        _state.branches = None
    return _state


def get_default_dtype():
    """Float dtype used for new parameters and converted inputs."""
    return _thread_state().dtype


def set_default_dtype(bits: int):
    """Set the default float width (32 or 64) for the calling thread."""
    if bits not in _DTYPES:
        raise InputError(f"precision must be 32 or 64, got {bits}")
    _thread_state().dtype = _DTYPES[bits]


@contextmanager
def precision(bits: int):
    """Temporarily switch the default float width."""
    state = _thread_state()
    previous = state.dtype
    set_default_dtype(bits)
    try:
        yield
    finally:
        state.dtype = previous


@contextmanager
def no_grad():
    """Disable tape recording; used for evaluation and optimizer updates."""
    state = _thread_state()
    previous = state.grad_enabled
    state.grad_enabled = False
    try:
        yield
    finally:
        state.grad_enabled = previous


def is_grad_enabled() -> bool:
    return _thread_state().grad_enabled


class BranchLog:
    """Branch choices of piecewise operations (relu masks, pooling argmax, signs).

    Inside :func:`frozen_branches` the first forward pass records its choices;
    after :meth:`rewind` each later pass replays them in order, so the
    function is evaluated on one smooth piece whatever the perturbation.
    """

    def __init__(self):
        self.choices: List[np.ndarray] = []
        self._cursor: Optional[int] = None

    def rewind(self):
        self._cursor = 0

    def resolve(self, choice: np.ndarray) -> np.ndarray:
        if self._cursor is None:
            self.choices.append(choice)
            return choice

        if self._cursor >= len(self.choices):
            raise InputError("forward pass made more branch choices than the recorded pass")
        recorded = self.choices[self._cursor]
        if recorded.shape != choice.shape:
            raise ShapeError('frozen_branches',
                             f"recorded choice {list(recorded.shape)} does not match {list(choice.shape)}")
        self._cursor += 1
        return recorded


@contextmanager
def frozen_branches():
    """Record, then replay, the branch choices of forward passes in this context."""
    state = _thread_state()
    previous = state.branches
    state.branches = BranchLog()
    try:
        yield state.branches
    finally:
        state.branches = previous


def branch(choice: np.ndarray) -> np.ndarray:
    """The branch choice to use: ``choice`` itself unless branches are frozen."""
    log = _thread_state().branches
    return choice if log is None else log.resolve(choice)


class Tensor:
    """n-dimensional real array participating in a reverse-mode graph."""

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        """Initialize tensor.

        Args:
            data: Array-like values; scalars become shape [1]
            requires_grad: Whether gradients flow to this tensor
            dtype: Float dtype; defaults to the thread's default dtype
        """
        array = np.asarray(data, dtype=dtype or get_default_dtype())
        if array.ndim == 0:
            array = array.reshape(1)
        if any(dim < 1 for dim in array.shape):
            raise ShapeError('tensor', f"all dimensions must be >= 1, got {list(array.shape)}")

        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node_id = next(_node_ids)
        self._tape: Optional['GradientTape'] = None

    @property
    def shape(self) -> List[int]:
        return list(self.data.shape)

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the values."""
        return self.data.reshape(-1)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._tape is None

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError('item', f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        """Drop the accumulated gradient; it is reallocated by the next backward."""
        self.grad = None

    def detach(self) -> 'Tensor':
        return Tensor(self.data.copy(), requires_grad=False, dtype=self.data.dtype)

    def backward(self):
        backward(self)

    # Operator sugar; the primitives live in ops.py
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.add(ops.scalar_mul(self, -1.0), other)

    def __mul__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scalar_mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        from . import ops
        return ops.scalar_mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, dtype={self.data.dtype})"


def tensor_of(shape: Sequence[int], values, requires_grad: bool = False, dtype=None) -> Tensor:
    """Build a leaf tensor from a dimension list and flat row-major values.

    Raises:
        ShapeError: dims < 1 or values length != product(shape)
    """
    shape = [int(dim) for dim in shape]
    if not shape or any(dim < 1 for dim in shape):
        raise ShapeError('tensor_of', f"all dimensions must be >= 1, got {shape}")

    flat = np.asarray(values, dtype=dtype or get_default_dtype()).reshape(-1)
    expected = int(np.prod(shape))
    if flat.size != expected:
        raise ShapeError('tensor_of', f"shape {shape} needs {expected} values, got {flat.size}")

    return Tensor(flat.reshape(shape), requires_grad=requires_grad, dtype=flat.dtype)


@dataclass
class TapeEntry:
    """One recorded operation."""
    name: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass(eq=False)
class GradientTape:
    """Ordered record of the operations of one forward pass."""
    entries: List[TapeEntry] = field(default_factory=list)
    _positions: Dict[int, int] = field(default_factory=dict)
    implicit: bool = False

    def __enter__(self) -> 'GradientTape':
        _thread_state().tapes.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _thread_state().tapes.pop()
        return False

    def record(self, name: str, inputs: Sequence[Tensor], output: Tensor, backward_fn):
        self._positions[output.node_id] = len(self.entries)
        self.entries.append(TapeEntry(name, tuple(inputs), output, backward_fn))
        output._tape = self

    def position(self, tensor: Tensor) -> Optional[int]:
        return self._positions.get(tensor.node_id)

    def clear(self):
        self.entries.clear()
        self._positions.clear()

    def absorb(self, other: 'GradientTape'):
        """Append the entries of an independent tape, leaving ``other`` empty."""
        for entry in other.entries:
            self._positions[entry.output.node_id] = len(self.entries)
            self.entries.append(entry)
            entry.output._tape = self
        other.clear()

    def backward(self, root: Tensor):
        """Accumulate d(root)/d(leaf) into every requires_grad leaf's ``grad``."""
        if root.size != 1:
            raise InputError(f"backward() needs a scalar root, got shape {root.shape}")

        end = self.position(root)
        if end is None:
            raise InputError("backward() root was not recorded on this tape")

        grads: Dict[int, np.ndarray] = {root.node_id: np.ones_like(root.data)}
        leaves: Dict[int, Tensor] = {}

        for entry in reversed(self.entries[:end + 1]):
            grad_out = grads.pop(entry.output.node_id, None)
            if grad_out is None:
                continue

            input_grads = entry.backward_fn(grad_out)
            fault = _backward_faults.get(entry.name)

            for tensor, grad in zip(entry.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if fault is not None:
                    grad = fault(grad)
                if tensor.node_id in grads:
                    grads[tensor.node_id] = grads[tensor.node_id] + grad
                else:
                    grads[tensor.node_id] = grad
                if tensor.is_leaf:
                    leaves[tensor.node_id] = tensor

        for node_id, tensor in leaves.items():
            grad = grads.get(node_id)
            if grad is None:
                continue
            if tensor.grad is None:
                tensor.grad = np.zeros_like(tensor.data)
            tensor.grad += grad.astype(tensor.data.dtype, copy=False)


def current_tape() -> Optional[GradientTape]:
    """The innermost explicit tape of this thread, if any."""
    state = _thread_state()
    return state.tapes[-1] if state.tapes else None


def _implicit_tape(inputs: Sequence[Tensor]) -> GradientTape:
    """Implicit tape of the graph the inputs belong to; graphs joined here are merged."""
    tapes: Dict[int, GradientTape] = {}
    for tensor in inputs:
        tape = tensor._tape
        if tape is not None and tape.implicit:
            tapes.setdefault(id(tape), tape)

    if not tapes:
        return GradientTape(implicit=True)
    merged, *others = tapes.values()
    for other in others:
        merged.absorb(other)
    return merged


def record(name: str, inputs: Sequence[Tensor], out_data: np.ndarray, backward_fn) -> Tensor:
    """Wrap ``out_data`` in a tensor and record it when any input needs gradients."""
    needs_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, dtype=out_data.dtype)
    if needs_grad:
        out.requires_grad = True
        tape = current_tape() or _implicit_tape(inputs)
        tape.record(name, inputs, out, backward_fn)
    return out


def backward(root: Tensor):
    """Reverse-mode accumulation from a scalar root.

    An implicit tape is cleared afterwards; explicit tapes are left to their
    owner.

    Raises:
        InputError: non-scalar root, or root detached from every tape
    """
    if root.size != 1:
        raise InputError(f"backward() needs a scalar root, got shape {root.shape}")

    if root.is_leaf:
        if not root.requires_grad:
            raise InputError("backward() root is detached from the computation graph")
        root.grad = np.ones_like(root.data) if root.grad is None else root.grad + 1.0
        return

    tape = root._tape
    tape.backward(root)
    if tape.implicit:
        tape.clear()
