"""Reverse-mode automatic differentiation over numpy arrays.

The tape is vector-level: every node holds a whole ndarray and a
vector-Jacobian product (vjp) that maps the gradient of the node's output
to gradients of its parents. Domain primitives (STFT magnitude, overlap-add,
frame-wise convolution, ...) are registered with :meth:`Value.from_op`
in the modules that own them.

    >>> x = Value(3.0, requires_grad=True)
    >>> loss = x * x
    >>> loss.backward()
    >>> float(x.grad)
    6.0
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class Value:
    """A node on the tape: forward ``data`` plus accumulated ``grad``."""

    __array_priority__ = 100.0
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self.requires_grad = requires_grad
        self._parents: tuple[Value, ...] = ()
        self._vjp: Callable | None = None
        self.name = name

    @classmethod
    def from_op(cls, data, parents: Sequence["Value"], vjp: Callable) -> "Value":
        """Create a node computed from ``parents``.

        ``vjp(g)`` must return one gradient (or None) per parent, each with
        that parent's shape.
        """
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = np.zeros_like(out.data)
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = tuple(parents) if out.requires_grad else ()
        out._vjp = vjp if out.requires_grad else None
        out.name = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Value{label}(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        backward(self)

    # arithmetic -------------------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        return vsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_value(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def any_value(*xs) -> bool:
    return any(isinstance(x, Value) for x in xs)


def unwrap(out: Value, *inputs):
    """Return ``out`` if any input was traced, else its plain ndarray."""
    return out if any_value(*inputs) else out.data


def _topological_order(root: Value) -> list[Value]:
    order: list[Value] = []
    seen: set[int] = set()
    stack: list[tuple[Value, bool]] = [(root, False)]
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
    return order


def backward(loss: Value) -> None:
    """Accumulate d(loss)/d(node) into ``.grad`` of every reachable node.

    Gradients add to whatever is already stored, so calling this twice
    without :func:`zero_grad` doubles them.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = _topological_order(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.asarray(pg, dtype=np.float64)
    for node in order:
        g = grads.get(id(node))
        if g is not None:
            node.grad = node.grad + g


def zero_grad(params: Iterable[Value]) -> None:
    for p in params:
        p.zero_grad()


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# elementwise --------------------------------------------------------------


def add(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    return Value.from_op(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    return Value.from_op(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Value:
    a, b = as_value(a), as_value(b)

    def vjp(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return Value.from_op(a.data * b.data, (a, b), vjp)


def div(a, b) -> Value:
    a, b = as_value(a), as_value(b)
    out = a.data / b.data

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * out / b.data, b.shape) if b.requires_grad else None
        return ga, gb

    return Value.from_op(out, (a, b), vjp)


def neg(a) -> Value:
    a = as_value(a)
    return Value.from_op(-a.data, (a,), lambda g: (-g,))


def power(a, exponent: float) -> Value:
    a = as_value(a)
    return Value.from_op(
        a.data**exponent, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),)
    )


def exp(a) -> Value:
    a = as_value(a)
    out = np.exp(a.data)
    return Value.from_op(out, (a,), lambda g: (g * out,))


def log(a) -> Value:
    a = as_value(a)
    return Value.from_op(np.log(a.data), (a,), lambda g: (g / a.data,))


def sin(a) -> Value:
    a = as_value(a)
    return Value.from_op(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def cos(a) -> Value:
    a = as_value(a)
    return Value.from_op(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def vabs(a) -> Value:
    """Absolute value; the subgradient at 0 is taken as 0."""
    a = as_value(a)
    return Value.from_op(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def sigmoid(a) -> Value:
    a = as_value(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return Value.from_op(s, (a,), lambda g: (g * s * (1.0 - s),))


# reductions and reshaping -------------------------------------------------


def vsum(a, axis=None, keepdims: bool = False) -> Value:
    a = as_value(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Value.from_op(out, (a,), vjp)


def mean(a, axis=None, keepdims: bool = False) -> Value:
    a = as_value(a)
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return vsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


def cumsum(a, axis: int = 0) -> Value:
    a = as_value(a)

    def vjp(g):
        return (np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis),)

    return Value.from_op(np.cumsum(a.data, axis=axis), (a,), vjp)


def reshape(a, shape) -> Value:
    a = as_value(a)
    return Value.from_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def getitem(a, index) -> Value:
    a = as_value(a)

    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in parts)

    def vjp(g):
        out = np.zeros_like(a.data)
        if basic:
            out[index] += g
        else:
            np.add.at(out, index, g)
        return (out,)

    return Value.from_op(a.data[index], (a,), vjp)


def concatenate(values: Sequence, axis: int = 0) -> Value:
    vs = [as_value(v) for v in values]
    sizes = [v.shape[axis] for v in vs]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Value.from_op(np.concatenate([v.data for v in vs], axis=axis), vs, vjp)


def matmul(a, b) -> Value:
    a, b = as_value(a), as_value(b)

    def vjp(g):
        ga = gb = None
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b.data)
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g if a.ndim > 1 else np.multiply.outer(a.data, g)
        return ga, gb

    return Value.from_op(a.data @ b.data, (a, b), vjp)


# gradient checking --------------------------------------------------------


def finite_diff_check(
    f: Callable[[Sequence[Value]], Value],
    params: Sequence[Value],
    epsilon: float = 1e-4,
    n_samples: int | None = 50,
    rng: np.random.Generator | int | None = 0,
    return_details: bool = False,
):
    """Compare analytic gradients against central differences.

    ``f`` maps the list of parameter Values to a scalar Value. For a random
    subset of coordinates (``n_samples`` per parameter, all if None) the
    relative error ``|a - n| / max(|a|, |n|, 1e-8)`` is evaluated and the
    maximum returned.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    rng = np.random.default_rng(rng)
    zero_grad(params)
    loss = f(params)
    backward(loss)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    details = []
    for pi, p in enumerate(params):
        flat = p.data.reshape(-1)
        if n_samples is None or n_samples >= flat.size:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=n_samples, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            up = float(f(params).data)
            flat[c] = orig - epsilon
            down = float(f(params).data)
            flat[c] = orig
            numeric = (up - down) / (2.0 * epsilon)
            a = float(analytic[pi].reshape(-1)[c])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
            details.append((pi, int(c), a, numeric, err))
    zero_grad(params)
    if return_details:
        return worst, details
    return worst
