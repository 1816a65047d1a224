"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

The graph is rebuilt on every forward pass: each result tensor keeps
references to its parents and a closure producing the local gradients.
There is deliberately no broadcasting; elementwise operations require
equal shapes and the few batch-vector patterns the pipeline needs are
explicit operations (``add_rowvec``, ``scale_rows``).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested operation."""


class Tensor:
    """Dense float64 tensor participating in the gradient graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Callable[[np.ndarray], tuple] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:  # pragma: no cover
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


def _make(data: np.ndarray, parents: Sequence[Tensor], grad_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._grad_fn = grad_fn
    return out


def _check_equal_shapes(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} do not match")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_equal_shapes("add", a, b)
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_equal_shapes("sub", a, b)
    return _make(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_equal_shapes("mul", a, b)
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul: expects 2-D operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dimensions of {a.data.shape} and {b.data.shape} differ")
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(t: Tensor) -> Tensor:
    if t.data.ndim != 2:
        raise ShapeError(f"transpose: expects a 2-D operand, got {t.data.shape}")
    return _make(t.data.T.copy(), (t,), lambda g: (g.T,))


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape)) != t.size:
        raise ShapeError(f"reshape: cannot view {t.data.shape} as {shape}")
    old = t.data.shape
    return _make(t.data.reshape(shape), (t,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ShapeError("concat: needs at least one tensor")
    ref = tensors[0].data.shape
    for t in tensors[1:]:
        s = t.data.shape
        if len(s) != len(ref) or any(s[i] != ref[i] for i in range(len(s)) if i != axis):
            raise ShapeError(f"concat: shape {s} incompatible with {ref} along axis {axis}")
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, grad_fn)


def slice_axis(t: Tensor, axis: int, start: int, stop: int) -> Tensor:
    if axis < 0 or axis >= t.data.ndim:
        raise ShapeError(f"slice: axis {axis} out of range for shape {t.data.shape}")
    idx = [slice(None)] * t.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def grad_fn(g):
        full = np.zeros_like(t.data)
        full[idx] = g
        return (full,)

    return _make(t.data[idx].copy(), (t,), grad_fn)


def sum(t: Tensor) -> Tensor:  # noqa: A001 - mirrors the operation set on purpose
    return _make(np.asarray(t.data.sum()), (t,), lambda g: (np.full_like(t.data, float(g)),))


def mean(t: Tensor) -> Tensor:
    n = t.size
    return _make(np.asarray(t.data.mean()), (t,), lambda g: (np.full_like(t.data, float(g) / n),))


def relu(t: Tensor) -> Tensor:
    mask = t.data > 0.0
    return _make(np.where(mask, t.data, 0.0), (t,), lambda g: (g * mask,))


def tanh(t: Tensor) -> Tensor:
    y = np.tanh(t.data)
    return _make(y, (t,), lambda g: (g * (1.0 - y * y),))


def softplus(t: Tensor) -> Tensor:
    y = np.logaddexp(0.0, t.data)

    def grad_fn(g):
        # numerically stable sigmoid; exp of a nonpositive argument
        e = np.exp(-np.abs(t.data))
        sig = np.where(t.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return (g * sig,)

    return _make(y, (t,), grad_fn)


def exp(t: Tensor) -> Tensor:
    y = np.exp(t.data)
    return _make(y, (t,), lambda g: (g * y,))


def log(t: Tensor) -> Tensor:
    if np.any(t.data <= 0.0):
        raise ValueError("log: operand must be strictly positive")
    return _make(np.log(t.data), (t,), lambda g: (g / t.data,))


def add_rowvec(t: Tensor, v: Tensor) -> Tensor:
    """Add a length-d vector to every row of a [n, d] tensor."""
    if t.data.ndim != 2 or v.data.ndim != 1 or t.data.shape[1] != v.data.shape[0]:
        raise ShapeError(f"add_rowvec: shapes {t.data.shape} and {v.data.shape} do not conform")
    return _make(t.data + v.data[None, :], (t, v), lambda g: (g, g.sum(axis=0)))


def scale_rows(t: Tensor, s: Tensor) -> Tensor:
    """Scale row i of a [n, d] tensor by scalar s[i]."""
    if t.data.ndim != 2 or s.data.ndim != 1 or t.data.shape[0] != s.data.shape[0]:
        raise ShapeError(f"scale_rows: shapes {t.data.shape} and {s.data.shape} do not conform")
    return _make(
        t.data * s.data[:, None],
        (t, s),
        lambda g: (g * s.data[:, None], (g * t.data).sum(axis=1)),
    )


def add_scalar(t: Tensor, c: float) -> Tensor:
    return _make(t.data + float(c), (t,), lambda g: (g,))


def detach(t: Tensor) -> Tensor:
    """Copy of t's value with no graph ancestry: gradients stop here."""
    return Tensor(t.data.copy())


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean of -log softmax(logits)[label], stabilized by max-subtraction.

    Accepts a [K] vector with an integer label or a [batch, K] matrix with a
    length-batch label vector.
    """
    if logits.data.ndim == 1:
        mat = logits.data[None, :]
        lab = np.asarray([labels], dtype=np.int64)
        squeeze = True
    elif logits.data.ndim == 2:
        mat = logits.data
        lab = np.asarray(labels, dtype=np.int64)
        squeeze = False
        if lab.shape != (mat.shape[0],):
            raise ShapeError(
                f"softmax_cross_entropy: {mat.shape[0]} rows but {lab.shape} labels"
            )
    else:
        raise ShapeError(f"softmax_cross_entropy: expects 1-D or 2-D logits, got {logits.data.shape}")
    k = mat.shape[1]
    if k < 2:
        raise ShapeError("softmax_cross_entropy: needs at least 2 classes")
    if np.any(lab < 0) or np.any(lab >= k):
        raise IndexError(f"softmax_cross_entropy: label out of range for {k} classes")

    shifted = mat - mat.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(mat.shape[0])
    losses = lse - shifted[rows, lab]
    n = mat.shape[0]

    def grad_fn(g):
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[rows, lab] -= 1.0
        d = p * (float(g) / n)
        return (d[0] if squeeze else d,)

    return _make(np.asarray(losses.mean()), (logits,), grad_fn)


def mse(a: Tensor, b: Tensor) -> Tensor:
    _check_equal_shapes("mse", a, b)
    diff = a.data - b.data
    n = diff.size

    def grad_fn(g):
        d = diff * (2.0 * float(g) / n)
        return (d, -d)

    return _make(np.asarray((diff * diff).mean()), (a, b), grad_fn)


def l1_distance(a: Tensor, b: Tensor) -> float:
    """Sum of absolute elementwise differences; evaluated outside the graph."""
    _check_equal_shapes("l1_distance", a, b)
    return float(np.abs(a.data - b.data).sum())


def gaussian_sample(mu: Tensor, sigma2: Tensor, rng: np.random.Generator) -> Tensor:
    """Reparameterized draw mu + sqrt(sigma2) * eps, eps ~ N(0, I)."""
    _check_equal_shapes("gaussian_sample", mu, sigma2)
    if np.any(sigma2.data < 0.0):
        raise ValueError("gaussian_sample: variance must be nonnegative")
    std = np.sqrt(sigma2.data)
    eps = rng.standard_normal(mu.data.shape)

    def grad_fn(g):
        dsigma2 = np.where(std > 0.0, g * eps * 0.5 / np.where(std > 0.0, std, 1.0), 0.0)
        return (g, dsigma2)

    return _make(mu.data + std * eps, (mu, sigma2), grad_fn)


def backward(loss: Tensor) -> None:
    """Propagate d loss / d ancestor into .grad of every requires_grad ancestor.

    Gradients are accumulated: call zero_grad between steps.
    """
    if loss.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    flow: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = flow.pop(id(node), None)
        if g is None:
            continue
        node.accumulate_grad(g)
        if node._grad_fn is None:
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if not parent.requires_grad or pg is None:
                continue
            key = id(parent)
            if key in flow:
                flow[key] = flow[key] + pg
            else:
                flow[key] = pg


def zero_grad(params: Sequence[Tensor]) -> None:
    for p in params:
        if p.grad is not None:
            p.grad[...] = 0.0
