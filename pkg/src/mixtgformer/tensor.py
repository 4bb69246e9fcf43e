"""Dense float64 tensors with reverse-mode differentiation.

Every primitive records its inputs and a gradient rule on the output tensor
when at least one input requires gradients. ``backward`` walks the recorded
graph in reverse topological order and accumulates gradients into leaves.

Gradient rules are module-level functions (``_*_grad``) looked up at
backward time, so a test can swap one out to prove the checker notices.
"""

import math

import numpy as np
from scipy import special

from .errors import ConfigError, ContractError, DimensionError, NumericalError

_SQRT_2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

ACTIVATIONS = ("relu", "tanh", "sigmoid", "gelu")


class Tensor:
    """A node in the differentiation graph.

    ``grad`` is ``None`` until ``backward`` reaches the tensor; afterwards it
    holds an array of the same shape. Gradients accumulate across calls, like
    most autograd libraries; call ``zero_grad`` between steps.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_rule", "op")

    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._rule = None
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    # operator sugar
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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, rule, op):
    if not math.isfinite(float(np.sum(data))):
        raise NumericalError(f"non-finite value produced by {op}")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._rule = rule
    else:
        out._parents = ()
        out._rule = None
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# --------------------------------------------------------------------------
# elementwise arithmetic


def _add_grad(a, b, g):
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


def _sub_grad(a, b, g):
    return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)


def _mul_grad(a, b, g):
    return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)


def _div_grad(a, b, g):
    ga = g / b.data
    return _unbroadcast(ga, a.shape), _unbroadcast(-ga * a.data / b.data, b.shape)


def _binary(a, b, fn, rule, op):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = fn(a.data, b.data)
    except ValueError as exc:
        raise DimensionError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from exc
    return _result(data, (a, b), lambda g: globals()[rule](a, b, g), op)


def add(a, b):
    return _binary(a, b, np.add, "_add_grad", "add")


def sub(a, b):
    return _binary(a, b, np.subtract, "_sub_grad", "sub")


def mul(a, b):
    return _binary(a, b, np.multiply, "_mul_grad", "mul")


def div(a, b):
    return _binary(a, b, np.divide, "_div_grad", "div")


def exp(x):
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        y = np.exp(x.data)  # overflow surfaces as NumericalError below
    return _result(y, (x,), lambda g: (g * y,), "exp")


def square(x):
    x = as_tensor(x)
    return _result(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), "square")


# --------------------------------------------------------------------------
# shape manipulation


def reshape(x, shape):
    x = as_tensor(x)
    try:
        y = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from exc
    return _result(y, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(axes))
    return _result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),), "transpose")


def swap_last(x):
    """Transpose the final two axes."""
    axes = list(range(as_tensor(x).ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, tuple(axes))


def getitem(x, index):
    x = as_tensor(x)

    def rule(g):
        full = np.zeros_like(x.data)
        full[index] += g
        return (full,)

    return _result(np.array(x.data[index]), (x,), rule, "getitem")


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        y = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise DimensionError(f"concat: incompatible shapes {shapes}") from exc
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result(y, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


# --------------------------------------------------------------------------
# reductions


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    y = np.sum(x.data, axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(np.asarray(y), (x,), rule, "sum")


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    axes = range(x.ndim) if axis is None else np.atleast_1d(axis)
    count = int(np.prod([x.shape[a] for a in axes]))
    return mul(tsum(x, axis, keepdims), 1.0 / count)


def norm_lastdim(x):
    """Euclidean norm over the last axis; the gradient at zero is taken as zero."""
    x = as_tensor(x)
    n = np.sqrt(np.sum(x.data * x.data, axis=-1))

    def rule(g):
        safe = np.where(n > 0.0, n, 1.0)
        scale = np.where(n > 0.0, g / safe, 0.0)
        return (x.data * scale[..., None],)

    return _result(n, (x,), rule, "norm")


# --------------------------------------------------------------------------
# linear algebra


def _matmul_grad(a, b, g):
    ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
    gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
    return ga, gb


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as exc:
        raise DimensionError(f"matmul: batch dims of {a.shape} and {b.shape} do not broadcast") from exc
    return _result(a.data @ b.data, (a, b), lambda g: _matmul_grad(a, b, g), "matmul")


def _linear_grad(x, w, b, g):
    g2 = g.reshape(-1, w.shape[1])
    gx = (g2 @ w.data.T).reshape(x.shape) if x.requires_grad else None
    gw = x.data.reshape(-1, w.shape[0]).T @ g2 if w.requires_grad else None
    gb = g2.sum(axis=0) if b is not None and b.requires_grad else None
    return (gx, gw) if b is None else (gx, gw, gb)


def linear(x, w, b=None):
    """``x @ w + b`` over the last axis of ``x``; ``w`` is (d_in, d_out)."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(f"linear: input {x.shape} does not match weight {w.shape}")
    y = (x.data.reshape(-1, w.shape[0]) @ w.data).reshape(x.shape[:-1] + (w.shape[1],))
    parents = (x, w)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (w.shape[1],):
            raise DimensionError(f"linear: bias {b.shape} does not match weight {w.shape}")
        y = y + b.data
        parents = (x, w, b)
    return _result(y, parents, lambda g: _linear_grad(x, w, b, g), "linear")


# --------------------------------------------------------------------------
# normalisation


def _softmax_grad(y, g):
    return y * (g - np.sum(g * y, axis=-1, keepdims=True))


def softmax_lastdim(x):
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionError(f"softmax: last dimension of {x.shape} is empty")
    e = np.exp(x.data - np.max(x.data, axis=-1, keepdims=True))
    y = e / np.sum(e, axis=-1, keepdims=True)
    return _result(y, (x,), lambda g: (globals()["_softmax_grad"](y, g),), "softmax")


def masked_softmax_lastdim(x, mask):
    """Softmax over the entries of each row where ``mask`` is True; others are 0.

    Every row must keep at least one entry. ``mask`` is a constant.
    """
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise DimensionError(f"masked softmax: mask {mask.shape} vs input {x.shape}")
    if not np.all(mask.any(axis=-1)):
        raise ContractError("masked softmax: a row keeps no entries")
    top = np.max(np.where(mask, x.data, -np.inf), axis=-1, keepdims=True)
    e = np.where(mask, np.exp(np.where(mask, x.data - top, 0.0)), 0.0)
    y = e / np.sum(e, axis=-1, keepdims=True)
    return _result(y, (x,), lambda g: (globals()["_softmax_grad"](y, g),), "masked_softmax")


def _layer_norm_grad(x, gamma, beta, xhat, inv_std, g):
    d = x.shape[-1]
    gx = None
    if x.requires_grad:
        gh = g * gamma.data
        gx = inv_std * (gh - gh.mean(axis=-1, keepdims=True)
                        - xhat * (gh * xhat).sum(axis=-1, keepdims=True) / d)
    flat = lambda a: a.reshape(-1, d)
    ggamma = flat(g * xhat).sum(axis=0) if gamma.requires_grad else None
    gbeta = flat(g).sum(axis=0) if beta.requires_grad else None
    return gx, ggamma, gbeta


def layer_norm(x, gamma, beta, eps=1e-5):
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layer_norm: affine {gamma.shape}/{beta.shape} vs input {x.shape}")
    if eps <= 0:
        raise ConfigError("layer_norm: eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    centred = x.data - mu
    inv_std = 1.0 / np.sqrt((centred * centred).mean(axis=-1, keepdims=True) + eps)
    xhat = centred * inv_std
    y = xhat * gamma.data + beta.data
    return _result(y, (x, gamma, beta),
                   lambda g: _layer_norm_grad(x, gamma, beta, xhat, inv_std, g), "layer_norm")


# --------------------------------------------------------------------------
# activations


def _relu_grad(x, y, g):
    return g * (x > 0.0)


def _tanh_grad(x, y, g):
    return g * (1.0 - y * y)


def _sigmoid_grad(x, y, g):
    return g * y * (1.0 - y)


def _gelu_grad(x, y, g):
    cdf = 0.5 * (1.0 + special.erf(x / _SQRT_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return g * (cdf + x * pdf)


def _gelu(x):
    return 0.5 * x * (1.0 + special.erf(x / _SQRT_2))


_FORWARD = {
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
    "sigmoid": special.expit,
    "gelu": _gelu,
}


def activation(kind, x):
    if kind not in _FORWARD:
        raise ConfigError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
    x = as_tensor(x)
    y = _FORWARD[kind](x.data)
    rule = f"_{kind}_grad"
    return _result(y, (x,), lambda g: (globals()[rule](x.data, y, g),), kind)


def relu(x):
    return activation("relu", x)


def tanh(x):
    return activation("tanh", x)


def sigmoid(x):
    return activation("sigmoid", x)


def gelu(x):
    return activation("gelu", x)


# --------------------------------------------------------------------------
# differentiation


def _topological_order(root):
    order, seen = [], set()
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
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``grad`` of every leaf requiring it."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._rule is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._rule(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


def finite_diff_grad(f, x, eps=None, coords=None):
    """Central-difference gradient of scalar ``f`` at array ``x``.

    The default step is ``1e-5 * max(1, |x_i|)`` per coordinate. With
    ``coords`` (flat indices) only those entries are estimated and a 1-D
    array in the same order is returned.
    """
    x = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    flat = x.reshape(-1)
    idx = range(flat.size) if coords is None else coords
    out = []
    for i in idx:
        h = eps if eps is not None else 1e-5 * max(1.0, abs(flat[i]))
        orig = flat[i]
        flat[i] = orig + h
        up_x = flat[i]
        fp = f(x)
        flat[i] = orig - h
        down_x = flat[i]
        fm = f(x)
        flat[i] = orig
        out.append((fp - fm) / (up_x - down_x))
    out = np.array(out)
    return out.reshape(x.shape) if coords is None else out
