"""Minimal dense-tensor engine with reverse-mode automatic differentiation.

Everything is float64. A forward pass builds a dynamic computation graph
(closures capture whatever the backward step needs); ``backward()`` on a
scalar root walks the graph in reverse topological order and accumulates
gradients into every tensor that requires them. Repeated backward calls
without zeroing accumulate, matching the usual autograd convention.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "as_tensor",
    "matmul",
    "concat",
    "softmax",
    "masked_softmax",
    "layer_norm",
    "relu",
    "gelu",
    "cos_elem",
    "sin_elem",
    "dropout",
    "sigmoid",
    "bce_with_logits",
]

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A float64 array plus an optional gradient buffer.

    ``data`` is treated as immutable once the tensor participates in a
    graph; only ``grad`` is mutated (by ``backward`` and ``zero_grad``).
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    # -- basic introspection --------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def zero_grad(self) -> None:
        self.grad = None

    # -- autodiff -------------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every requires-grad tensor.

        The root must be scalar (one element); anything else is a contract
        violation because the seed gradient would be ambiguous.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward() requires a scalar root, got shape {self.shape}"
            )
        # Iterative topological order; recursion would overflow on long chains.
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        self._accum_grad(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accum_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out_data = self.data + other.data
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accum_grad(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accum_grad(_unbroadcast(g, b.shape))

        return Tensor._from_op(out_data, (a, b), backward)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __neg__(self):
        a = self

        def backward(g):
            a._accum_grad(-g)

        return Tensor._from_op(-self.data, (a,), backward)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        out_data = a.data * b.data

        def backward(g):
            if a.requires_grad:
                a._accum_grad(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accum_grad(_unbroadcast(g * a.data, b.shape))

        return Tensor._from_op(out_data, (a, b), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other
        out_data = a.data / b.data

        def backward(g):
            if a.requires_grad:
                a._accum_grad(_unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                b._accum_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        return Tensor._from_op(out_data, (a, b), backward)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent: float):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        a = self
        out_data = a.data ** exponent

        def backward(g):
            a._accum_grad(g * exponent * a.data ** (exponent - 1))

        return Tensor._from_op(out_data, (a,), backward)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    # -- shape ops ------------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old_shape = a.shape

        def backward(g):
            a._accum_grad(g.reshape(old_shape))

        return Tensor._from_op(a.data.reshape(shape), (a,), backward)

    def swapaxes(self, ax1: int, ax2: int) -> "Tensor":
        a = self

        def backward(g):
            a._accum_grad(g.swapaxes(ax1, ax2))

        return Tensor._from_op(a.data.swapaxes(ax1, ax2), (a,), backward)

    @property
    def T(self) -> "Tensor":
        if self.ndim != 2:
            raise ValueError("T is defined for 2-D tensors; use swapaxes")
        return self.swapaxes(0, 1)

    def __getitem__(self, key) -> "Tensor":
        a = self
        out_data = a.data[key]

        def backward(g):
            buf = np.zeros_like(a.data)
            np.add.at(buf, key, g)
            a._accum_grad(buf)

        return Tensor._from_op(np.ascontiguousarray(out_data), (a,), backward)

    # -- reductions -----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is None:
                a._accum_grad(np.broadcast_to(g, a.shape).copy())
            else:
                if not keepdims:
                    g = np.expand_dims(g, axis)
                a._accum_grad(np.broadcast_to(g, a.shape).copy())

        return Tensor._from_op(out_data, (a,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            n = self.size
        else:
            n = self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


def as_tensor(x) -> Tensor:
    """Wrap arrays/scalars as constant tensors; pass tensors through."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy stacking semantics on leading axes.

    Both operands must be at least 2-D; the last two axes are contracted
    as ``(m, k) @ (k, n) -> (m, n)`` and leading axes broadcast.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accum_grad(_unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape))
        if b.requires_grad:
            b._accum_grad(_unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape))

    return Tensor._from_op(out_data, (a, b), backward)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along ``axis``; backward splits the gradient."""
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accum_grad(g[tuple(idx)])

    return Tensor._from_op(out_data, tuple(tensors), backward)


# -- nonlinearities ----------------------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Shift-invariant softmax along ``axis``; rows sum to one."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        x._accum_grad(y * (g - dot))

    return Tensor._from_op(y, (x,), backward)


def masked_softmax(x: Tensor, valid: np.ndarray, axis: int = -1) -> Tensor:
    """Softmax over the entries where ``valid`` is True.

    Invalid entries get weight exactly zero. A slice with no valid entry
    yields an all-zero row rather than NaN, which is the "attend to
    nothing, emit the zero message" convention used by the models.
    """
    x = as_tensor(x)
    valid = np.asarray(valid, dtype=bool)
    neg = np.where(valid, x.data, -np.inf)
    mx = neg.max(axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)  # fully-masked slice guard
    e = np.exp(np.where(valid, x.data - mx, -np.inf))
    e = np.where(valid, e, 0.0)
    denom = e.sum(axis=axis, keepdims=True)
    y = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        x._accum_grad(y * (g - dot))

    return Tensor._from_op(y, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit (population) variance,
    then apply the elementwise affine ``gamma * xhat + beta``.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accum_grad(_unbroadcast(g * xhat, gamma.shape))
        if beta.requires_grad:
            beta._accum_grad(_unbroadcast(g, beta.shape))
        if x.requires_grad:
            gx = g * gamma.data
            term = gx - gx.mean(axis=-1, keepdims=True) \
                - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            x._accum_grad(term * inv)

    return Tensor._from_op(out_data, (x, gamma, beta), backward)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        x._accum_grad(g * mask)

    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), backward)


def gelu(x: Tensor) -> Tensor:
    """Exact Gaussian-CDF GELU: x * Phi(x)."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI

    def backward(g):
        x._accum_grad(g * (cdf + x.data * pdf))

    return Tensor._from_op(x.data * cdf, (x,), backward)


def cos_elem(x: Tensor) -> Tensor:
    x = as_tensor(x)
    c = np.cos(x.data)
    s = np.sin(x.data)

    def backward(g):
        x._accum_grad(-g * s)

    return Tensor._from_op(c, (x,), backward)


def sin_elem(x: Tensor) -> Tensor:
    x = as_tensor(x)
    c = np.cos(x.data)
    s = np.sin(x.data)

    def backward(g):
        x._accum_grad(g * c)

    return Tensor._from_op(s, (x,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: surviving entries are scaled by 1/(1-rate).

    Callers are expected to skip the call entirely at evaluation time.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    x = as_tensor(x)
    keep = rng.random(x.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    factor = keep * scale

    def backward(g):
        x._accum_grad(g * factor)

    return Tensor._from_op(x.data * factor, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = _stable_sigmoid(x.data)

    def backward(g):
        x._accum_grad(g * s * (1.0 - s))

    return Tensor._from_op(s, (x,), backward)


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(logits: Tensor, labels, reduction: str = "mean") -> Tensor:
    """Binary cross entropy on raw logits, in log-sum-exp form.

    Per element: max(z, 0) - z*y + log(1 + exp(-|z|)), which never
    overflows and agrees with -[y log s(z) + (1-y) log(1 - s(z))].
    """
    logits = as_tensor(logits)
    y = np.asarray(labels, dtype=np.float64)
    z = logits.data
    losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    if reduction == "mean":
        out_data = losses.mean()
        grad_scale = 1.0 / max(losses.size, 1)
    elif reduction == "sum":
        out_data = losses.sum()
        grad_scale = 1.0
    elif reduction == "none":
        out_data = losses
        grad_scale = None
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    s = _stable_sigmoid(z)

    def backward(g):
        if grad_scale is None:
            logits._accum_grad(g * (s - y))
        else:
            logits._accum_grad(g * (s - y) * grad_scale)

    return Tensor._from_op(out_data, (logits,), backward)
