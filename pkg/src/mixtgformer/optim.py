"""AdamW with decoupled weight decay."""

from dataclasses import dataclass, field

import numpy as np

from .params import named_tensors


@dataclass
class AdamWState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adamw_step(params, state, lr=5e-4, weight_decay=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place update of every tensor in ``params`` that has a gradient.

    Decay is applied to the weights first (``w *= 1 - lr * wd``), then the
    bias-corrected Adam step. Tensors whose ``grad`` is None are treated as
    having zero gradient.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in named_tensors(params):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data = p.data * (1.0 - lr * weight_decay)
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state
