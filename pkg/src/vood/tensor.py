"""Dense float64 tensors with taped reverse-mode differentiation.

Every differentiable operation takes an explicit :class:`Tape`, records one
node on it, and charges the tape's multiply-accumulate counter. The MAC
convention is fixed so cost reports are exact statements, not estimates:

* ``matmul`` (m, k) x (k, n) charges m*k*n forward;
* elementwise ``mul`` and the fused ``cross_entropy`` dot product charge
  one MAC per multiplied element;
* additions, subtractions, ReLU, exp, log, log-softmax (including its
  temperature division), reshapes, slices and index picks charge zero;
* the backward sweep charges every visited node exactly twice its forward
  MACs (one multiply for the upstream-input gradient, one for the
  weight-side gradient), so a pure dense stack costs 2F backward for an
  F-MAC forward.

A tape and the tensors recorded on it form a single-owner unit: nothing
here locks, so share nothing, or move whole tapes between threads.
Parallel scoring should use one tape per sample.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DomainError, ShapeError, TapeError

_tid_counter = itertools.count()

ELEMENTWISE_OPS = ("add", "sub", "mul", "relu", "exp", "log")
_BINARY = ("add", "sub", "mul")


class Tensor:
    """Dense array of 64-bit floats, identified by a unique ``tid``.

    ``data`` is always C-contiguous float64; ``values`` exposes the flat
    row-major view. Tensors are plain value holders: all arithmetic goes
    through the module-level taped operations.
    """

    __slots__ = ("data", "tid")

    def __init__(self, values, shape=None):
        arr = np.array(values, dtype=np.float64, copy=True)
        if shape is not None:
            arr = arr.reshape(tuple(shape))
        self.data = np.ascontiguousarray(arr)
        self.tid = next(_tid_counter)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the payload."""
        return self.data.reshape(-1)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def copy(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, tid={self.tid})"


def _wrap(data: np.ndarray) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    out.tid = next(_tid_counter)
    return out


@dataclass
class Node:
    op: str
    inputs: tuple
    output: Tensor
    macs: int
    ctx: tuple = ()


class Tape:
    """Ordered record of operations plus the running MAC counter.

    Operands of every node precede it (the recording API enforces this by
    construction), and ``mac_count`` only ever grows.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self.mac_count: int = 0

    def record(self, op, inputs, output, macs, ctx=()) -> Tensor:
        self.nodes.append(Node(op, tuple(inputs), output, macs, ctx))
        self.mac_count += macs
        return output

    def __len__(self):
        return len(self.nodes)


class GradientMap:
    """Gradients keyed by tensor identity; shapes always match primals."""

    def __init__(self, grads: dict):
        self._grads = grads

    def of(self, t: Tensor) -> np.ndarray:
        """Gradient of the loss w.r.t. ``t`` (zeros if the loss never
        depended on it)."""
        g = self._grads.get(t.tid)
        if g is None:
            return np.zeros_like(t.data)
        return g

    def has(self, t: Tensor) -> bool:
        return t.tid in self._grads

    def __len__(self):
        return len(self._grads)


# ---------------------------------------------------------------------------
# forward operations


def matmul(a: Tensor, b: Tensor, tape: Tape) -> Tensor:
    """Matrix product of two 2-D tensors; charges m*k*n MACs."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    m, k = a.data.shape
    k2, n = b.data.shape
    if k != k2:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    out = _wrap(K.matmul_nn(a.data, b.data))
    return tape.record("matmul", (a, b), out, m * k * n)


def elementwise(op_kind: str, operands, tape: Tape) -> Tensor:
    """Elementwise add/sub/mul/relu/exp/log.

    Binary ops need equal shapes; the only broadcast allowed is a
    single-element tensor against anything. ``mul`` charges one MAC per
    output element, the rest are free.
    """
    if op_kind not in ELEMENTWISE_OPS:
        raise ShapeError(f"unknown elementwise op {op_kind!r}")
    operands = tuple(operands)
    if op_kind in _BINARY:
        if len(operands) != 2:
            raise ShapeError(f"{op_kind} takes two operands, got {len(operands)}")
        a, b = operands
        if a.shape != b.shape and a.size != 1 and b.size != 1:
            raise ShapeError(f"{op_kind} shape mismatch: {a.shape} vs {b.shape}")
        if op_kind == "add":
            data = a.data + b.data
        elif op_kind == "sub":
            data = a.data - b.data
        else:
            data = a.data * b.data
        out = _wrap(data)
        macs = out.size if op_kind == "mul" else 0
        return tape.record(op_kind, (a, b), out, macs)

    if len(operands) != 1:
        raise ShapeError(f"{op_kind} takes one operand, got {len(operands)}")
    (x,) = operands
    if op_kind == "relu":
        data = np.maximum(x.data, 0.0)
    elif op_kind == "exp":
        data = np.exp(x.data)
    else:
        if np.any(x.data <= 0.0):
            raise DomainError("log requires strictly positive inputs")
        data = np.log(x.data)
    out = _wrap(data)
    return tape.record(op_kind, (x,), out, 0)


def add(a, b, tape):
    return elementwise("add", (a, b), tape)


def sub(a, b, tape):
    return elementwise("sub", (a, b), tape)


def mul(a, b, tape):
    return elementwise("mul", (a, b), tape)


def relu(x, tape):
    return elementwise("relu", (x,), tape)


def exp(x, tape):
    return elementwise("exp", (x,), tape)


def log(x, tape):
    return elementwise("log", (x,), tape)


def bias_add(x: Tensor, b: Tensor, tape: Tape) -> Tensor:
    """Add a (n,) bias to every row of a (m, n) tensor. Zero MACs."""
    if x.data.ndim != 2 or b.data.ndim != 1 or x.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"bias_add needs (m, n) + (n,), got {x.shape} and {b.shape}")
    out = _wrap(x.data + b.data[None, :])
    return tape.record("bias_add", (x, b), out, 0)


def reshape(x: Tensor, shape, tape: Tape) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}")
    out = _wrap(x.data.reshape(shape))
    return tape.record("reshape", (x,), out, 0, ctx=(x.shape,))


def narrow(x: Tensor, start: int, stop: int, tape: Tape) -> Tensor:
    """Contiguous slice along the last axis. Zero MACs."""
    width = x.data.shape[-1]
    if not (0 <= start < stop <= width):
        raise ShapeError(f"narrow range [{start}, {stop}) invalid for width {width}")
    out = _wrap(x.data[..., start:stop])
    return tape.record("narrow", (x,), out, 0, ctx=(start, stop))


def pick(x: Tensor, index: int, tape: Tape) -> Tensor:
    """Scalar gather from a 1-D tensor. Zero MACs."""
    if x.data.ndim != 1:
        raise ShapeError(f"pick needs a 1-D tensor, got {x.shape}")
    if not (0 <= index < x.size):
        raise ShapeError(f"pick index {index} out of range for size {x.size}")
    out = _wrap(x.data[index])
    return tape.record("pick", (x,), out, 0, ctx=(index,))


def sum_all(x: Tensor, tape: Tape) -> Tensor:
    """Sum of all elements (scalar output). Zero MACs: additions only."""
    out = _wrap(x.data.sum())
    return tape.record("sum", (x,), out, 0)


def log_softmax(logits: Tensor, tape: Tape, temperature: float = 1.0) -> Tensor:
    """Numerically stable log-softmax over the last axis.

    1-D input gives the plain distribution, 2-D applies row-wise. The
    optional temperature divides the logits before normalization; being
    part of the normalization it charges no MACs.
    """
    if logits.size == 0:
        raise ShapeError("log_softmax of an empty tensor")
    if temperature <= 0.0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    if logits.data.ndim == 1:
        data = K.log_softmax_rows(logits.data[None, :], temperature)[0]
    elif logits.data.ndim == 2:
        data = K.log_softmax_rows(logits.data, temperature)
    else:
        raise ShapeError(f"log_softmax needs 1-D or 2-D input, got {logits.shape}")
    out = _wrap(data)
    return tape.record("log_softmax", (logits,), out, 0, ctx=(temperature,))


def cross_entropy(log_probs: Tensor, soft_label: Tensor, tape: Tape) -> Tensor:
    """-sum(label * log_prob) for 1-D inputs; row mean for 2-D inputs.

    Labels must be componentwise nonnegative and sum to one (per row)
    within 1e-9. Charges one MAC per multiplied element.
    """
    if log_probs.shape != soft_label.shape:
        raise ShapeError(f"cross_entropy shape mismatch: {log_probs.shape} vs {soft_label.shape}")
    lbl = soft_label.data
    if lbl.ndim not in (1, 2) or lbl.size == 0:
        raise ShapeError(f"cross_entropy needs nonempty 1-D or 2-D input, got {lbl.shape}")
    if np.any(lbl < 0.0):
        raise DomainError("soft label has negative entries")
    sums = lbl.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise DomainError("soft label rows must sum to 1 within 1e-9")
    per = -(lbl * log_probs.data).sum(axis=-1)
    out = _wrap(per if lbl.ndim == 1 else per.mean())
    rows = 1 if lbl.ndim == 1 else lbl.shape[0]
    return tape.record("cross_entropy", (log_probs, soft_label), out, lbl.size, ctx=(rows,))


# ---------------------------------------------------------------------------
# backward


def _accumulate(grads, t: Tensor, g: np.ndarray):
    if t.size == 1 and g.shape != t.data.shape:
        g = np.asarray(g.sum()).reshape(t.data.shape)
    cur = grads.get(t.tid)
    if cur is None:
        grads[t.tid] = g.astype(np.float64, copy=True).reshape(t.data.shape)
    else:
        cur += g.reshape(t.data.shape)


def _backward_node(node: Node, g: np.ndarray, grads: dict):
    op = node.op
    if op == "matmul":
        a, b = node.inputs
        _accumulate(grads, a, K.matmul_nt(g, b.data))
        _accumulate(grads, b, K.matmul_tn(a.data, g))
    elif op == "add":
        a, b = node.inputs
        _accumulate(grads, a, g)
        _accumulate(grads, b, g)
    elif op == "sub":
        a, b = node.inputs
        _accumulate(grads, a, g)
        _accumulate(grads, b, -g)
    elif op == "mul":
        a, b = node.inputs
        _accumulate(grads, a, g * b.data)
        _accumulate(grads, b, g * a.data)
    elif op == "relu":
        (x,) = node.inputs
        _accumulate(grads, x, g * (x.data > 0.0))
    elif op == "exp":
        (x,) = node.inputs
        _accumulate(grads, x, g * node.output.data)
    elif op == "log":
        (x,) = node.inputs
        _accumulate(grads, x, g / x.data)
    elif op == "bias_add":
        x, b = node.inputs
        _accumulate(grads, x, g)
        _accumulate(grads, b, g.sum(axis=0))
    elif op == "reshape":
        (x,) = node.inputs
        _accumulate(grads, x, g.reshape(x.data.shape))
    elif op == "narrow":
        (x,) = node.inputs
        start, stop = node.ctx
        gx = np.zeros_like(x.data)
        gx[..., start:stop] = g
        _accumulate(grads, x, gx)
    elif op == "pick":
        (x,) = node.inputs
        (index,) = node.ctx
        gx = np.zeros_like(x.data)
        gx[index] = g.sum()
        _accumulate(grads, x, gx)
    elif op == "sum":
        (x,) = node.inputs
        _accumulate(grads, x, np.full_like(x.data, g.sum()))
    elif op == "log_softmax":
        (x,) = node.inputs
        (temperature,) = node.ctx
        soft = np.exp(node.output.data)
        if node.output.data.ndim == 1:
            gx = (g - soft * g.sum()) / temperature
        else:
            gx = (g - soft * g.sum(axis=1, keepdims=True)) / temperature
        _accumulate(grads, x, gx)
    elif op == "cross_entropy":
        lp, lbl = node.inputs
        (rows,) = node.ctx
        scale = float(g.sum()) / rows
        _accumulate(grads, lp, -lbl.data * scale)
        _accumulate(grads, lbl, -lp.data * scale)
    else:  # pragma: no cover - exhaustive dispatch
        raise TapeError(f"no backward rule for op {op!r}")


def backward(tape: Tape, loss: Tensor) -> GradientMap:
    """Reverse sweep from ``loss`` over everything recorded before it.

    Returns gradients for every tensor the loss depends on; ``of()``
    answers zeros for the rest. Each visited node charges the tape twice
    its forward MACs.
    """
    if loss.size != 1:
        raise TapeError(f"loss must be scalar, got shape {loss.shape}")
    loss_idx = None
    for i in range(len(tape.nodes) - 1, -1, -1):
        if tape.nodes[i].output.tid == loss.tid:
            loss_idx = i
            break
    if loss_idx is None:
        raise TapeError("loss tensor was not recorded on this tape")

    grads: dict = {loss.tid: np.ones_like(loss.data)}
    backward_macs = 0
    for node in reversed(tape.nodes[: loss_idx + 1]):
        g = grads.get(node.output.tid)
        if g is None:
            continue
        backward_macs += 2 * node.macs
        _backward_node(node, g, grads)
    tape.mac_count += backward_macs
    return GradientMap(grads)
