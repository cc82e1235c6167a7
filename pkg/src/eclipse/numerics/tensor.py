"""Dense float64 tensors with a reverse-mode autodiff tape.

Everything is CPU numpy under the hood. Ops record themselves on the
currently active :class:`Tape` (a context manager); with no active tape
they run value-only, which is the fast path used during evaluation.
Gradients are accumulated per tensor identity when ``Tape.backward`` is
called on a scalar loss.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class NumericsError(RuntimeError):
    """Autodiff misuse or a non-finite value caught by the NaN guard."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """Input outside an op's mathematical domain (e.g. log of x <= 0)."""


_nan_guard = True


def set_nan_guard(enabled: bool) -> None:
    """Toggle the per-op finiteness check (on by default)."""
    global _nan_guard
    _nan_guard = bool(enabled)


class Tensor:
    """A dense float64 array plus gradient metadata.

    Tensors with ``requires_grad=False`` are treated as immutable
    constants and are safe to share across episodes/threads.
    """

    __slots__ = ("data", "requires_grad", "grad", "op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.op: str | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """A constant copy sharing no graph history (data is copied)."""
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{grad})"

    # operator sugar; python scalars become constants
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class _Node:
    __slots__ = ("out_id", "parents", "vjp", "op")

    def __init__(self, out_id, parents, vjp, op):
        self.out_id = out_id
        self.parents = parents
        self.vjp = vjp
        self.op = op


_active_tape: "Tape | None" = None


class Tape:
    """Execution-ordered op record; ``backward`` replays it once, reversed.

    Use as a context manager around the forward pass:

        with Tape() as tape:
            loss = model(...)
        grads = tape.backward(loss)
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._consumed = False
        self._prev: Tape | None = None

    def __enter__(self) -> "Tape":
        global _active_tape
        self._prev = _active_tape
        _active_tape = self
        return self

    def __exit__(self, *exc) -> None:
        global _active_tape
        _active_tape = self._prev
        self._prev = None

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> dict[Tensor, Array]:
        """Accumulate d(loss)/d(leaf) for every requires_grad leaf.

        Each node is visited exactly once, in reverse execution order.
        The returned map is keyed by tensor identity; gradients are also
        added into each leaf's ``.grad``. A second call without a fresh
        forward pass is an error.
        """
        if self._consumed:
            raise NumericsError(
                "backward() already consumed this tape; re-run the forward pass"
            )
        if loss.shape != ():
            raise DimensionError(f"loss must be scalar, got shape {loss.shape}")
        self._consumed = True

        acc: dict[int, Array] = {id(loss): np.asarray(1.0)}
        holder: dict[int, Tensor] = {id(loss): loss}
        for node in reversed(self._nodes):
            g = acc.pop(node.out_id, None)
            if g is None:
                continue
            holder.pop(node.out_id, None)
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                pid = id(parent)
                if pid in acc:
                    acc[pid] = acc[pid] + pg
                else:
                    acc[pid] = pg
                    holder[pid] = parent

        leaf_grads: dict[Tensor, Array] = {}
        for pid, g in acc.items():
            t = holder[pid]
            if not t.requires_grad:
                continue
            g = np.asarray(g, dtype=np.float64).reshape(t.shape)
            leaf_grads[t] = g
            t.grad = g if t.grad is None else t.grad + g
        return leaf_grads


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _emit(data: Array, op: str, parents: tuple[Tensor, ...], vjp) -> Tensor:
    """Create an op output, guard it, and record it if a tape is active."""
    if _nan_guard and not np.all(np.isfinite(data)):
        raise NumericsError(f"{op}: non-finite value in output")
    out = Tensor(data)
    out.op = op
    tape = _active_tape
    if tape is not None and any(p.requires_grad for p in parents):
        if tape._consumed:
            raise NumericsError(
                f"{op}: recording on a consumed tape; start a new Tape"
            )
        out.requires_grad = True
        tape._nodes.append(_Node(id(out), parents, vjp, op))
    return out


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Reduce a broadcast gradient back to the parent's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=requires_grad)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise DimensionError(f"add: {a.shape} vs {b.shape}") from exc
    return _emit(
        data, "add", (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError as exc:
        raise DimensionError(f"sub: {a.shape} vs {b.shape}") from exc
    return _emit(
        data, "sub", (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    """Element-wise product (broadcasting like numpy)."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise DimensionError(f"mul: {a.shape} vs {b.shape}") from exc
    return _emit(
        data, "mul", (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        ),
    )


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _emit(-a.data, "neg", (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    """Matrix/vector product for ndim combinations (2,2), (2,1), (1,2), (1,1)."""
    a, b = _as_tensor(a), _as_tensor(b)
    na, nb = a.data.ndim, b.data.ndim
    if na not in (1, 2) or nb not in (1, 2):
        raise DimensionError(f"matmul: ndim must be 1 or 2, got {na} and {nb}")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def vjp(g: Array):
        if na == 2 and nb == 2:
            return g @ b.data.T, a.data.T @ g
        if na == 2 and nb == 1:
            return np.outer(g, b.data), a.data.T @ g
        if na == 1 and nb == 2:
            return b.data @ g, np.outer(a.data, g)
        return g * b.data, g * a.data  # vector . vector -> scalar

    return _emit(data, "matmul", (a, b), vjp)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along ``axis``; non-axis dims must match exactly."""
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise DimensionError("concat: need at least one tensor")
    ndim = parts[0].data.ndim
    for p in parts[1:]:
        if p.data.ndim != ndim:
            raise DimensionError("concat: mixed ndims")
        for ax in range(ndim):
            if ax != axis % ndim and p.shape[ax] != parts[0].shape[ax]:
                raise DimensionError(
                    f"concat: non-axis dim mismatch {p.shape} vs {parts[0].shape}"
                )
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis % ndim] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g: Array):
        slices = []
        for i in range(len(parts)):
            idx = [slice(None)] * ndim
            idx[axis % ndim] = slice(offsets[i], offsets[i + 1])
            slices.append(g[tuple(idx)])
        return tuple(slices)

    return _emit(data, "concat", tuple(parts), vjp)


def stack(vectors: Sequence[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors into a (n, d) matrix."""
    vectors = [_as_tensor(v) for v in vectors]
    if not vectors:
        raise DimensionError("stack: need at least one vector")
    d = vectors[0].shape
    if len(d) != 1 or any(v.shape != d for v in vectors):
        raise DimensionError("stack: all inputs must be 1-D of equal length")
    data = np.stack([v.data for v in vectors])
    return _emit(
        data, "stack", tuple(vectors),
        lambda g: tuple(g[i] for i in range(len(vectors))),
    )


def narrow(a: Tensor, start: int, length: int, axis: int = 0) -> Tensor:
    """Contiguous slice [start, start+length) along ``axis``."""
    a = _as_tensor(a)
    if start < 0 or start + length > a.shape[axis]:
        raise DimensionError(
            f"narrow: [{start}, {start + length}) out of range for axis {axis} "
            f"of shape {a.shape}"
        )
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def vjp(g: Array):
        out = np.zeros_like(a.data)
        out[idx] = g
        return (out,)

    return _emit(a.data[idx].copy(), "narrow", (a,), vjp)


def gather(a: Tensor, indices) -> Tensor:
    """Select entries of a 1-D tensor; repeated indices accumulate grads."""
    a = _as_tensor(a)
    if a.data.ndim != 1:
        raise DimensionError("gather: input must be 1-D")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise DimensionError(f"gather: index out of range for length {a.shape[0]}")

    def vjp(g: Array):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _emit(a.data[idx], "gather", (a,), vjp)


def row(a: Tensor, index: int) -> Tensor:
    """Row ``a[index]`` of a matrix, as a 1-D vector."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise DimensionError("row: input must be 2-D")
    if not 0 <= index < a.shape[0]:
        raise DimensionError(f"row: index {index} out of range {a.shape[0]}")

    def vjp(g: Array):
        out = np.zeros_like(a.data)
        out[index] = g
        return (out,)

    return _emit(a.data[index].copy(), "row", (a,), vjp)


def pick(a: Tensor, index: int) -> Tensor:
    """Scalar element a[index] of a 1-D tensor."""
    a = _as_tensor(a)
    if a.data.ndim != 1:
        raise DimensionError("pick: input must be 1-D")
    if not 0 <= index < a.shape[0]:
        raise DimensionError(f"pick: index {index} out of range {a.shape[0]}")

    def vjp(g: Array):
        out = np.zeros_like(a.data)
        out[index] = g
        return (out,)

    return _emit(a.data[index], "pick", (a,), vjp)


def total(a: Tensor) -> Tensor:
    """Sum of all entries (scalar)."""
    a = _as_tensor(a)
    return _emit(
        a.data.sum(), "total", (a,),
        lambda g: (np.broadcast_to(g, a.shape).copy(),),
    )


def sigmoid(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _emit(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _emit(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def exp(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):  # overflow surfaces via the NaN guard
        out = np.exp(a.data)
    return _emit(out, "exp", (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0.0):
        raise DomainError("log: input must be strictly positive")
    return _emit(np.log(a.data), "log", (a,), lambda g: (g / a.data,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along ``axis``; output sums to 1 there."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g: Array):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return _emit(out, "softmax", (a,), vjp)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def vjp(g: Array):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _emit(out, "log_softmax", (a,), vjp)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows ``table[ids]`` as a (len(ids), emb_dim) matrix.

    Gradients scatter-add back onto the looked-up rows only.
    """
    table = _as_tensor(table)
    if table.data.ndim != 2:
        raise DimensionError("embedding_lookup: table must be 2-D")
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise DimensionError("embedding_lookup: ids must be a non-empty 1-D sequence")
    if idx.min() < 0 or idx.max() >= table.shape[0]:
        raise DimensionError(
            f"embedding_lookup: id out of range for table of {table.shape[0]} rows"
        )

    def vjp(g: Array):
        out = np.zeros_like(table.data)
        np.add.at(out, idx, g)
        return (out,)

    return _emit(table.data[idx], "embedding_lookup", (table,), vjp)
