"""Small parameter containers and a walker that names every tensor."""

import dataclasses
import math

import numpy as np

from . import tensor as tc
from .tensor import Tensor


@dataclasses.dataclass
class LinearParams:
    w: Tensor
    b: Tensor

    def __call__(self, x):
        return tc.linear(x, self.w, self.b)


@dataclasses.dataclass
class NormParams:
    gamma: Tensor
    beta: Tensor

    def __call__(self, x):
        return tc.layer_norm(x, self.gamma, self.beta)


def init_linear(rng, d_in, d_out, std=None, zero=False):
    std = 1.0 / math.sqrt(d_in) if std is None else std
    w = np.zeros((d_in, d_out)) if zero else rng.normal(0.0, std, (d_in, d_out))
    return LinearParams(Tensor(w, requires_grad=True), Tensor(np.zeros(d_out), requires_grad=True))


def init_norm(dim):
    return NormParams(Tensor(np.ones(dim), requires_grad=True),
                      Tensor(np.zeros(dim), requires_grad=True))


def named_tensors(obj, prefix=""):
    """Yield ``(dotted_name, Tensor)`` for every tensor reachable from ``obj``.

    Walks dataclass fields, lists and tuples in declaration order.
    """
    if isinstance(obj, Tensor):
        yield prefix, obj
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            name = f"{prefix}.{f.name}" if prefix else f.name
            yield from named_tensors(getattr(obj, f.name), name)
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            yield from named_tensors(item, f"{prefix}.{i}" if prefix else str(i))


def param_count(obj):
    """Exact number of scalar parameters, found by walking every tensor."""
    return sum(t.size for _, t in named_tensors(obj))


def zero_grads(obj):
    for _, t in named_tensors(obj):
        t.grad = None
