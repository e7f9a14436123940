"""Reverse-mode automatic differentiation over dense float64 arrays.

A `Tape` records every operation whose inputs include a tracked tensor, in
execution order, which is automatically a topological order.  `backward`
walks the record once in reverse, accumulating adjoints; a node feeding
several consumers therefore receives the sum of its consumers' contributions.

The op set is deliberately small (matmul, elementwise arithmetic, reductions,
concat/slice/reshape/transpose, square/sqrt/log, ReLU, softmax): enough to
express the beamforming network and its loss while keeping every backward
rule independently checkable against finite differences.  All data is
float64; complex quantities live outside this module as (re, im) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Array = np.ndarray


def _as_array(x) -> Array:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Ordered record of differentiable operations."""

    def __init__(self):
        # each entry: (input node ids (None for untracked), backward fn or None)
        self._nodes: list[tuple[tuple[int | None, ...], Callable | None]] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _record(self, input_ids: tuple[int | None, ...], backward: Callable | None) -> int:
        self._nodes.append((input_ids, backward))
        return len(self._nodes) - 1

    def parameter(self, data) -> "Tensor":
        """Tracked leaf tensor; gradients accumulate at its node."""
        arr = _as_array(data)
        node_id = self._record((), None)
        return Tensor(arr, self, node_id)

    def backward(self, loss: "Tensor") -> "Gradients":
        """Adjoints of a scalar `loss` with respect to every tracked tensor."""
        if loss.tape is not self:
            raise ValueError("backward: loss was not recorded on this tape")
        if loss.data.size != 1:
            raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
        grads: list[Array | None] = [None] * len(self._nodes)
        grads[loss.node_id] = np.ones_like(loss.data)
        for node_id in range(len(self._nodes) - 1, -1, -1):
            gout = grads[node_id]
            if gout is None:
                continue
            input_ids, backward = self._nodes[node_id]
            if backward is None:
                continue
            for iid, part in zip(input_ids, backward(gout)):
                if iid is None or part is None:
                    continue
                if grads[iid] is None:
                    grads[iid] = part.copy() if part.base is not None else part
                else:
                    grads[iid] = grads[iid] + part
        return Gradients(self, grads)


class Gradients:
    """Result of a backward pass; zero for tracked tensors the loss never touched."""

    def __init__(self, tape: Tape, grads: list[Array | None]):
        self._tape = tape
        self._grads = grads

    def wrt(self, t: "Tensor") -> Array:
        if t.tape is not self._tape or t.node_id is None:
            raise ValueError("gradient requested for a tensor not tracked on this tape")
        g = self._grads[t.node_id]
        return np.zeros_like(t.data) if g is None else g


class Tensor:
    """float64 array, optionally tracked on a tape."""

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape: Tape | None = None, node_id: int | None = None):
        self.data = _as_array(data)
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def tracked(self) -> bool:
        return self.node_id is not None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, tracked={self.tracked})"

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    # -- named ops --------------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        return sum_reduce(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean_reduce(self, axis=axis, keepdims=keepdims)

    def square(self):
        return square(self)

    def sqrt(self):
        return sqrt(self)

    def log(self):
        return log(self)

    def relu(self):
        return relu(self)

    def softmax(self, axis: int):
        return softmax(self, axis)

    def transpose(self, axes: Sequence[int] | None = None):
        return transpose(self, axes)

    def reshape(self, shape: Sequence[int]):
        return reshape(self, shape)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _common_tape(op: str, *tensors: Tensor) -> Tape | None:
    tapes = {t.tape for t in tensors if t.tape is not None}
    if len(tapes) > 1:
        raise ValueError(f"{op}: inputs recorded on different tapes")
    return tapes.pop() if tapes else None


def _emit(op: str, out: Array, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    """Wrap `out`, recording the node if any input is tracked."""
    tape = _common_tape(op, *inputs)
    if tape is None or not any(t.tracked for t in inputs):
        return Tensor(out)
    node_id = tape._record(tuple(t.node_id for t in inputs), backward)
    return Tensor(out, tape, node_id)


def _check_broadcast(op: str, a: Array, b: Array) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise binary ops


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast("add", a.data, b.data)
    out = a.data + b.data
    ash, bsh = a.data.shape, b.data.shape
    return _emit("add", out, (a, b),
                 lambda g: (_unbroadcast(g, ash), _unbroadcast(g, bsh)))


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast("sub", a.data, b.data)
    out = a.data - b.data
    ash, bsh = a.data.shape, b.data.shape
    return _emit("sub", out, (a, b),
                 lambda g: (_unbroadcast(g, ash), _unbroadcast(-g, bsh)))


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast("mul", a.data, b.data)
    out = a.data * b.data
    ad, bd = a.data, b.data
    return _emit("mul", out, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast("div", a.data, b.data)
    if np.any(b.data == 0.0):
        raise ValueError("div: division by zero")
    out = a.data / b.data
    ad, bd = a.data, b.data
    return _emit("div", out, (a, b),
                 lambda g: (_unbroadcast(g / bd, ad.shape),
                            _unbroadcast(-g * ad / (bd * bd), bd.shape)))


# ---------------------------------------------------------------------------
# matmul and structural ops


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError(f"matmul: operands must be >= 2-D, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul: inner dimensions differ, {a.data.shape} vs {b.data.shape}")
    out = a.data @ b.data
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape)
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return ga, gb

    return _emit("matmul", out, (a, b), backward)


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    ts = [_lift(t) for t in tensors]
    if not ts:
        raise ValueError("concat: need at least one tensor")
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
                     for i in range(len(ts)))

    return _emit("concat", out, ts, backward)


def take(a, idx) -> Tensor:
    """Basic (slice/integer) indexing."""
    a = _lift(a)
    out = a.data[idx]
    in_shape = a.data.shape

    def backward(g):
        z = np.zeros(in_shape)
        z[idx] = g
        return (z,)

    return _emit("slice", np.array(out, copy=True), (a,), backward)


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = _lift(a)
    out = np.transpose(a.data, axes)
    inv = None if axes is None else tuple(np.argsort(axes))
    return _emit("transpose", out, (a,), lambda g: (np.transpose(g, inv),))


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = _lift(a)
    in_shape = a.data.shape
    out = a.data.reshape(shape)
    return _emit("reshape", out, (a,), lambda g: (g.reshape(in_shape),))


# ---------------------------------------------------------------------------
# reductions


def _reduce_grad(g: Array, in_shape: tuple[int, ...], axis, keepdims: bool) -> Array:
    if axis is None:
        return np.broadcast_to(g, in_shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, in_shape)


def sum_reduce(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    in_shape = a.data.shape
    return _emit("sum", np.asarray(out), (a,),
                 lambda g: (_reduce_grad(g, in_shape, axis, keepdims),))


def mean_reduce(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    in_shape = a.data.shape
    if axis is None:
        count = a.data.size
    elif isinstance(axis, tuple):
        count = int(np.prod([in_shape[i] for i in axis]))
    else:
        count = in_shape[axis]
    return _emit("mean", np.asarray(out), (a,),
                 lambda g: (_reduce_grad(g, in_shape, axis, keepdims) / count,))


# ---------------------------------------------------------------------------
# elementwise unary ops


def square(a) -> Tensor:
    a = _lift(a)
    ad = a.data
    return _emit("square", ad * ad, (a,), lambda g: (2.0 * ad * g,))


def sqrt(a) -> Tensor:
    a = _lift(a)
    if np.any(a.data < 0.0):
        raise ValueError("sqrt: negative input")
    out = np.sqrt(a.data)
    return _emit("sqrt", out, (a,), lambda g: (g / (2.0 * out),))


def log(a) -> Tensor:
    a = _lift(a)
    if np.any(a.data <= 0.0):
        raise ValueError("log: input must be strictly positive")
    ad = a.data
    return _emit("log", np.log(ad), (a,), lambda g: (g / ad,))


def relu(a) -> Tensor:
    a = _lift(a)
    ad = a.data
    return _emit("relu", np.maximum(ad, 0.0), (a,), lambda g: (g * (ad > 0.0),))


def softmax(a, axis: int) -> Tensor:
    """Numerically stable softmax along `axis` (max-subtracted)."""
    a = _lift(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return _emit("softmax", out, (a,), backward)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckResult:
    """Per-parameter max normalized error between tape and finite differences."""

    errors: dict[str, float]
    tolerance: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def grad_check(fn: Callable[[Mapping[str, Tensor]], Tensor],
               params: Mapping[str, Array],
               step: float = 1e-5,
               tolerance: float = 1e-5) -> GradCheckResult:
    """Compare tape gradients of `fn` against central finite differences.

    `fn` maps a dict of tensors (tracked or not) to a scalar tensor and must
    be evaluable at perturbed parameter values.  The error for parameter p is
    max|g_tape - g_fd| / max(1, max|g_fd|), so near-zero gradients are judged
    on an absolute scale.  Step per element is `step * (1 + |x|)`.
    """
    tape = Tape()
    tracked = {k: tape.parameter(v) for k, v in params.items()}
    loss = fn(tracked)
    grads = tape.backward(loss)

    def eval_at(values: Mapping[str, Array]) -> float:
        return fn({k: Tensor(v) for k, v in values.items()}).item()

    errors: dict[str, float] = {}
    for name, base in params.items():
        base = _as_array(base)
        g_ad = grads.wrt(tracked[name])
        g_fd = np.zeros_like(base)
        flat = base.reshape(-1)
        for i in range(flat.size):
            h = step * (1.0 + abs(flat[i]))
            for sign in (+1.0, -1.0):
                values = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
                values[name].reshape(-1)[i] += sign * h
                g_fd.reshape(-1)[i] += sign * eval_at(values) / (2.0 * h)
        scale = max(1.0, float(np.max(np.abs(g_fd))) if g_fd.size else 0.0)
        errors[name] = float(np.max(np.abs(g_ad - g_fd)) / scale) if g_fd.size else 0.0
    return GradCheckResult(errors=errors, tolerance=tolerance)
