# ─────────────────────────────────────────────────────────────────────────────
# Dense float64 tensors with a define-by-run reverse-mode gradient tape
# ─────────────────────────────────────────────────────────────────────────────
#
# Usage:
#
#     with Tape() as tape:
#         W = tape.variable(W0)
#         loss = reduce("mean", elementwise("square", matmul(x, W) - y))
#     (dW,) = grad(loss, [W])
#
# Ops called outside an active tape (or on tensors that are not tracked by the
# active tape) compute values only and record nothing, so the same model code
# serves training (taped) and evaluation (untaped).

import contextvars
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from lib.errors import ContractError, DimensionError, DomainError, NumericError

_ACTIVE_TAPE = contextvars.ContextVar("active_tape", default=None)


# ─────────────────────────────────────────────────────────────────────────────
# Tensor and tape
# ─────────────────────────────────────────────────────────────────────────────

class Tensor:
    """Immutable float64 array, optionally tracked by a tape."""

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, *, tape=None, node=None, op="constant"):
        arr = np.array(data, dtype=np.float64)
        _check_finite(arr, op)
        arr.setflags(write=False)
        self.data = arr
        self.tape = tape
        self.node = node

    @classmethod
    def _wrap(cls, arr, op, tape=None, node=None):
        t = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.float64)
        _check_finite(arr, op)
        arr.setflags(write=False)
        t.data = arr
        t.tape = tape
        t.node = node
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return np.array(self.data)

    def __repr__(self):
        tracked = "tracked" if self.tape is not None else "constant"
        return f"Tensor(shape={self.shape}, {tracked})"

    # operator sugar, each maps onto one op below
    def __add__(self, other):
        return elementwise("add", self, _as_tensor(other))

    def __sub__(self, other):
        return elementwise("sub", self, _as_tensor(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return elementwise("mul", self, other)
        return mul_const(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul_const(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


@dataclass(frozen=True)
class TapeNode:
    op: str
    parents: tuple          # node ids on the same tape, None for constants
    backward: Callable      # output gradient -> tuple of parent gradients


class Tape:
    """
    Linear record of the ops executed while the tape is active.

    Nodes are appended in execution order, so parents always precede their
    children and a reverse sweep over the list is a valid topological order.
    One tape belongs to one thread; separate threads use separate tapes.
    """

    def __init__(self):
        self.nodes = []
        self._token = None

    def __enter__(self):
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self.nodes)

    def variable(self, value):
        """Register a leaf whose gradient can be requested."""
        node = len(self.nodes)
        self.nodes.append(TapeNode("leaf", (), _no_backward))
        return Tensor(value, tape=self, node=node, op="leaf")

    def _record(self, op, parents, out, backward):
        node = len(self.nodes)
        parent_ids = tuple(p.node if p.tape is self else None for p in parents)
        self.nodes.append(TapeNode(op, parent_ids, backward))
        return Tensor._wrap(out, op, tape=self, node=node)


def _no_backward(g):
    return ()


def _check_finite(arr, op):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{op} produced non-finite values")


def _as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def constant(value):
    return Tensor(value)


def _emit(op, parents, out, backward):
    tape = _ACTIVE_TAPE.get()
    if tape is None or not any(p.tape is tape for p in parents):
        return Tensor._wrap(out, op)
    return tape._record(op, parents, out, backward)


# ─────────────────────────────────────────────────────────────────────────────
# Activations and their derivatives (orders 0..3)
# ─────────────────────────────────────────────────────────────────────────────

def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_d1(x):
    # x == 0 falls on the exponential branch: e^0 = 1 on both sides
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def _elu_d2(x):
    return np.where(x > 0, 0.0, np.exp(np.minimum(x, 0.0)))


def _sigmoid_d1(x):
    s = expit(x)
    return s * (1 - s)


def _sigmoid_d2(x):
    s = expit(x)
    return s * (1 - s) * (1 - 2 * s)


def _sigmoid_d3(x):
    s = expit(x)
    return s * (1 - s) * (1 - 6 * s + 6 * s * s)


def _tanh_d1(x):
    t = np.tanh(x)
    return 1 - t * t


def _tanh_d2(x):
    t = np.tanh(x)
    return -2 * t * (1 - t * t)


def _tanh_d3(x):
    t = np.tanh(x)
    return (1 - t * t) * (6 * t * t - 2)


def _zeros(x):
    return np.zeros_like(x)


def _ones(x):
    return np.ones_like(x)


ACTIVATION_DERIVATIVES = {
    "elu":     (_elu, _elu_d1, _elu_d2, _elu_d2),
    "sigmoid": (expit, _sigmoid_d1, _sigmoid_d2, _sigmoid_d3),
    "tanh":    (np.tanh, _tanh_d1, _tanh_d2, _tanh_d3),
    "relu":    (lambda x: np.maximum(x, 0.0), lambda x: (x > 0).astype(np.float64), _zeros, _zeros),
    "linear":  (lambda x: np.array(x, dtype=np.float64), _ones, _zeros, _zeros),
}


def activation(tag, x, order=0):
    """
    Apply an activation (order 0) or its first/second derivative (order 1/2).

    Derivative orders are ordinary tape ops, which is what lets losses that
    contain σ′ or σ″ be differentiated with a single reverse sweep.
    """
    if tag not in ACTIVATION_DERIVATIVES:
        raise ContractError(f"unsupported activation {tag!r}")
    if order not in (0, 1, 2):
        raise ContractError(f"activation derivative order {order} not supported")
    table = ACTIVATION_DERIVATIVES[tag]
    xv = x.data
    out = table[order](xv)

    def backward(g):
        return (g * table[order + 1](xv),)

    return _emit(tag + "'" * order, (x,), out, backward)


# ─────────────────────────────────────────────────────────────────────────────
# Core ops
# ─────────────────────────────────────────────────────────────────────────────

def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.data, b.data

    def backward(g):
        return (g @ bv.T, av.T @ g)

    return _emit("matmul", (a, b), av @ bv, backward)


_BINARY = ("add", "sub", "mul")
_UNARY = ("elu", "sigmoid", "tanh", "relu", "sin", "abs", "square")


def elementwise(tag, *args):
    if tag in _BINARY:
        if len(args) != 2:
            raise ContractError(f"{tag} takes two operands")
        a, b = args
        if a.shape != b.shape:
            raise DimensionError(f"{tag}: shape mismatch {a.shape} vs {b.shape}")
        av, bv = a.data, b.data
        if tag == "add":
            return _emit(tag, args, av + bv, lambda g: (g, g))
        if tag == "sub":
            return _emit(tag, args, av - bv, lambda g: (g, -g))
        return _emit(tag, args, av * bv, lambda g: (g * bv, g * av))

    if tag not in _UNARY:
        raise ContractError(f"unknown elementwise op {tag!r}")
    if len(args) != 1:
        raise ContractError(f"{tag} takes one operand")
    (x,) = args
    if tag in ACTIVATION_DERIVATIVES:
        return activation(tag, x)
    xv = x.data
    if tag == "sin":
        return _emit(tag, args, np.sin(xv), lambda g: (g * np.cos(xv),))
    if tag == "abs":
        return _emit(tag, args, np.abs(xv), lambda g: (g * np.sign(xv),))
    return _emit(tag, args, xv * xv, lambda g: (2.0 * g * xv,))


def reduce(tag, t):
    """Reduce to a 0-d scalar tensor."""
    if t.size == 0:
        raise DomainError(f"{tag} of an empty tensor")
    shape, n = t.shape, t.size
    if tag == "sum":
        return _emit("sum", (t,), np.sum(t.data), lambda g: (np.full(shape, g),))
    if tag == "mean":
        return _emit("mean", (t,), np.mean(t.data), lambda g: (np.full(shape, g / n),))
    raise ContractError(f"unknown reduction {tag!r}")


def add_bias(x, b):
    """Add a bias vector to every row of a 2-D tensor."""
    if x.data.ndim != 2 or b.data.ndim != 1 or b.shape[0] != x.shape[1]:
        raise DimensionError(f"add_bias: bias {b.shape} does not fit rows of {x.shape}")
    return _emit("add_bias", (x, b), x.data + b.data, lambda g: (g, g.sum(axis=0)))


def mul_const(t, c):
    """Multiply by a constant scalar or a constant array of the same shape."""
    cv = np.asarray(c, dtype=np.float64)
    if cv.ndim != 0 and cv.shape != t.shape:
        raise DimensionError(f"mul_const: constant {cv.shape} does not fit {t.shape}")
    return _emit("mul_const", (t,), t.data * cv, lambda g: (g * cv,))


def take_rows(t, start, stop):
    if not 0 <= start <= stop <= t.shape[0]:
        raise DimensionError(f"take_rows: [{start}, {stop}) outside {t.shape[0]} rows")
    shape = t.shape

    def backward(g):
        full = np.zeros(shape)
        full[start:stop] = g
        return (full,)

    return _emit("take_rows", (t,), t.data[start:stop], backward)


def gather_columns(t, index):
    """Select (possibly repeated) columns of a 2-D tensor."""
    idx = np.asarray(index, dtype=np.intp)
    if t.data.ndim != 2 or (idx.size and (idx.min() < 0 or idx.max() >= t.shape[1])):
        raise DimensionError(f"gather_columns: index out of range for {t.shape}")
    shape = t.shape

    def backward(g):
        full = np.zeros(shape)
        np.add.at(full, (slice(None), idx), g)
        return (full,)

    return _emit("gather_columns", (t,), t.data[:, idx], backward)


def hstack(tensors):
    tensors = list(tensors)
    rows = {t.shape[0] for t in tensors}
    if len(rows) != 1 or any(t.data.ndim != 2 for t in tensors):
        raise DimensionError("hstack: operands must be 2-D with equal row counts")
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward(g):
        return tuple(g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _emit("hstack", tuple(tensors), np.hstack([t.data for t in tensors]), backward)


def mean_square(t):
    return reduce("mean", elementwise("square", t))


def half_sum_square(t):
    """½‖t‖², the usual l2 weight penalty."""
    return mul_const(reduce("sum", elementwise("square", t)), 0.5)


# ─────────────────────────────────────────────────────────────────────────────
# Reverse sweep
# ─────────────────────────────────────────────────────────────────────────────

def grad(loss, wrt):
    """
    Exact reverse-mode gradients of a scalar `loss` with respect to leaves.

    Leaves that do not influence the loss get zero gradients. Each tape node
    between the loss and the start of the tape is visited at most once.
    """
    if loss.size != 1:
        raise ContractError(f"grad needs a scalar loss, got shape {loss.shape}")
    tape = loss.tape
    for w in wrt:
        if w.tape is not None and tape is not None and w.tape is tape:
            if tape.nodes[w.node].op != "leaf":
                raise ContractError("grad: can only differentiate with respect to leaves")
    if tape is None:
        return [Tensor(np.zeros(w.shape)) for w in wrt]

    grads = [None] * (loss.node + 1)
    grads[loss.node] = np.ones(loss.shape)
    for i in range(loss.node, -1, -1):
        g = grads[i]
        node = tape.nodes[i]
        if g is None or node.op == "leaf":
            continue
        for pid, pg in zip(node.parents, node.backward(g)):
            if pid is None:
                continue
            grads[pid] = pg if grads[pid] is None else grads[pid] + pg

    out = []
    for w in wrt:
        g = grads[w.node] if (w.tape is tape and w.node < len(grads)) else None
        out.append(Tensor(np.zeros(w.shape) if g is None else g))
    return out
