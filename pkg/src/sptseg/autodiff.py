"""Dense tensors with reverse-mode automatic differentiation.

A `Tensor` wraps a float64 numpy array. Every operation that produces a new
tensor records its parents and a backward closure; `backward` on a scalar
walks the recorded graph in reverse topological order and accumulates
gradients into every tensor with `requires_grad=True`.

Broadcasting is deliberately narrow: operands must be numpy-broadcastable,
and in practice the library only ever broadcasts a vector (or a size-1
axis) over the token axis.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError, NonFiniteError

__all__ = [
    "Tensor", "Graph", "tensor", "zeros", "ones", "elementwise",
    "matmul", "concat", "softmax", "backward", "check_gradients",
    "no_grad",
]


_grad_enabled = True


class no_grad:
    """Context manager that suspends graph recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _check_finite(data):
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("tensor contains NaN or Inf")


class Tensor:
    """A dense float64 array with optional gradient tracking."""

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        _check_finite(self.data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    # -- construction of op results --------------------------------------

    @staticmethod
    def _from_op(data, parents, backward_fn):
        data = np.asarray(data, dtype=np.float64)
        _check_finite(data)
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        tracked = _grad_enabled and any(p.requires_grad for p in parents)
        if tracked:
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward_fn
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- basic introspection ----------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        return _binary("add", self, other)

    def __radd__(self, other):
        return _binary("add", _as_tensor(other), self)

    def __sub__(self, other):
        return _binary("sub", self, other)

    def __rsub__(self, other):
        return _binary("sub", _as_tensor(other), self)

    def __mul__(self, other):
        return _binary("mul", self, other)

    def __rmul__(self, other):
        return _binary("mul", _as_tensor(other), self)

    def __truediv__(self, other):
        return _binary("div", self, other)

    def __rtruediv__(self, other):
        return _binary("div", _as_tensor(other), self)

    def __neg__(self):
        return _from_unary(self, -self.data, lambda g: -g)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        src_shape = self.data.shape

        def bw(g, out):
            full = np.zeros(src_shape)
            np.add.at(full, idx, g)
            return (full,)

        return Tensor._from_op(self.data[idx], (self,), bw)

    # -- shape ops ---------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.data.shape
        return Tensor._from_op(
            self.data.reshape(shape), (self,),
            lambda g, out: (g.reshape(src),))

    def transpose(self, axes):
        inv = np.argsort(axes)
        return Tensor._from_op(
            self.data.transpose(axes), (self,),
            lambda g, out: (g.transpose(inv),))

    def swapaxes(self, a, b):
        return Tensor._from_op(
            self.data.swapaxes(a, b), (self,),
            lambda g, out: (g.swapaxes(a, b),))

    # -- reductions / pointwise -------------------------------------------

    def sum(self, axis=None, keepdims=False):
        src = self.data.shape

        def bw(g, out):
            if axis is None:
                return (np.broadcast_to(g, src).copy(),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, src).copy(),)

        return Tensor._from_op(self.data.sum(axis=axis, keepdims=keepdims), (self,), bw)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def exp(self):
        out_data = np.exp(self.data)
        return _from_unary(self, out_data, lambda g: g * out_data)

    def log(self):
        if np.any(self.data <= 0):
            raise ContractError("log requires strictly positive input")
        return _from_unary(self, np.log(self.data), lambda g: g / self.data)

    def sqrt(self):
        if np.any(self.data < 0):
            raise ContractError("sqrt requires non-negative input")
        out_data = np.sqrt(self.data)
        return _from_unary(self, out_data, lambda g: g * 0.5 / np.maximum(out_data, 1e-300))

    def pow(self, p):
        x = self.data
        return _from_unary(self, x ** p, lambda g: g * p * x ** (p - 1))

    def clamp(self, lo, hi):
        x = self.data
        mask = ((x >= lo) & (x <= hi)).astype(np.float64)
        return _from_unary(self, np.clip(x, lo, hi), lambda g: g * mask)

    def tanh(self):
        t = np.tanh(self.data)
        return _from_unary(self, t, lambda g: g * (1.0 - t * t))

    def gelu(self):
        """tanh-approximated GELU."""
        x = self.data
        c = np.sqrt(2.0 / np.pi)
        x2 = x * x
        t = np.tanh(c * (x + 0.044715 * x2 * x))
        out_data = 0.5 * x * (1.0 + t)

        def bw(g):
            dinner = c * (1.0 + 0.134145 * x2)
            return g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)

        return _from_unary(self, out_data, bw)


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def ones(shape, requires_grad=False):
    return Tensor(np.ones(shape), requires_grad=requires_grad)


def _from_unary(a, data, grad_fn):
    return Tensor._from_op(data, (a,), lambda g, out: (grad_fn(g),))


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(grad.shape, shape)) if s == 1 and gs != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _binary(op, a, b):
    a = _as_tensor(a)
    b = _as_tensor(b)
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise DimensionError(
            f"{op}: shapes {a.data.shape} and {b.data.shape} are not broadcastable")
    ash, bsh = a.data.shape, b.data.shape
    if op == "add":
        data = a.data + b.data

        def bw(g, out):
            return _unbroadcast(g, ash), _unbroadcast(g, bsh)
    elif op == "sub":
        data = a.data - b.data

        def bw(g, out):
            return _unbroadcast(g, ash), _unbroadcast(-g, bsh)
    elif op == "mul":
        data = a.data * b.data

        def bw(g, out):
            return _unbroadcast(g * b.data, ash), _unbroadcast(g * a.data, bsh)
    elif op == "div":
        if np.any(b.data == 0):
            raise ContractError("division by zero")
        data = a.data / b.data

        def bw(g, out):
            return (_unbroadcast(g / b.data, ash),
                    _unbroadcast(-g * a.data / (b.data * b.data), bsh))
    else:
        raise ContractError(f"unknown elementwise op {op!r}")
    return Tensor._from_op(data, (a, b), bw)


def elementwise(op, a, b):
    """Tagged elementwise arithmetic: op in {add, sub, mul, div}."""
    return _binary(op, a, b)


def matmul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank>=2 operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner extents disagree: {a.shape} x {b.shape}")
    ash, bsh = a.data.shape, b.data.shape

    def bw(g, out):
        ga = _unbroadcast(np.matmul(g, b.data.swapaxes(-1, -2)), ash)
        gb = _unbroadcast(np.matmul(a.data.swapaxes(-1, -2), g), bsh)
        return ga, gb

    return Tensor._from_op(np.matmul(a.data, b.data), (a, b), bw)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g, out):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=axis),
                           tuple(tensors), bw)


def softmax(x, axis=-1):
    """Numerically stable softmax along `axis`."""
    x = _as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g, out):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - dot),)

    return Tensor._from_op(s, (x,), bw)


def layer_norm(x, gamma, beta, eps=1e-6):
    """Layer normalization over the last axis."""
    x = _as_tensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gamma.data + beta.data

    def bw(g, out):
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv * (dxhat - m1 - xhat * m2)
        red = tuple(range(g.ndim - 1))
        ggamma = (g * xhat).sum(axis=red)
        gbeta = g.sum(axis=red)
        return gx, ggamma, gbeta

    return Tensor._from_op(data, (x, gamma, beta), bw)


def box_filter(x, win):
    """Uniform local mean over the two trailing spatial axes of (B, H, W).

    Zero-padded 'same' filtering; the operator is self-adjoint, so the
    backward pass is the same filter applied to the incoming gradient.
    """
    from . import kernels
    x = _as_tensor(x)
    if x.ndim != 3:
        raise DimensionError(f"box_filter expects (B, H, W), got {x.shape}")
    return Tensor._from_op(
        kernels.box_filter(x.data, win), (x,),
        lambda g, out: (kernels.box_filter(g, win),))


class Graph:
    """Topologically ordered record of the operations reaching a root."""

    def __init__(self, root):
        order = []
        seen = set()
        stack = [(root, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        self.root = root
        self.order = order  # topological: parents before children

    def run_backward(self):
        grads = {id(self.root): np.ones_like(self.root.data)}
        for node in reversed(self.order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and node._backward is None:
                node._accumulate(g)
            if node._backward is None:
                continue
            parent_grads = node._backward(g, node)
            for p, pg in zip(node._parents, parent_grads):
                if not p.requires_grad:
                    continue
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = np.asarray(pg, dtype=np.float64)


def backward(loss):
    """Populate `.grad` on every tracked leaf reachable from scalar `loss`."""
    if not isinstance(loss, Tensor) or loss.data.ndim != 0:
        raise ContractError("backward requires a scalar Tensor")
    Graph(loss).run_backward()


def check_gradients(f, inputs, step=1e-5):
    """Compare autodiff gradients of scalar f(*inputs) to central differences.

    Returns a dict: per-input max relative error plus a finiteness flag.
    Relative error uses |ad - fd| / max(|ad| + |fd|, 1e-6).
    """
    for t in inputs:
        t.zero_grad()
        t.requires_grad = True
    out = f(*inputs)
    if out.data.ndim != 0:
        raise ContractError("check_gradients expects a scalar-valued builder")
    finite = bool(np.isfinite(out.data))
    backward(out)
    ad_grads = [np.zeros_like(t.data) if t.grad is None else t.grad.copy()
                for t in inputs]

    errors = []
    with no_grad():
        for t, ad in zip(inputs, ad_grads):
            fd = np.zeros_like(t.data)
            flat = t.data.ravel()
            fd_flat = fd.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                hi = float(f(*inputs).data)
                flat[i] = orig - step
                lo = float(f(*inputs).data)
                flat[i] = orig
                fd_flat[i] = (hi - lo) / (2 * step)
            if not np.all(np.isfinite(fd)):
                finite = False
            denom = np.maximum(np.abs(ad) + np.abs(fd), 1e-6)
            errors.append(float(np.max(np.abs(ad - fd) / denom)) if fd.size else 0.0)

    return {"max_rel_error": max(errors) if errors else 0.0,
            "per_input": errors,
            "finite": finite}
