"""Spatial and temporal multi-head self-attention."""

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .errors import ConfigError, DimensionError
from .tensor import Tensor

MODES = ("spatial", "temporal")


@dataclass
class MhsaParams:
    """Per-head projections stored column-blocked: head ``i`` owns columns
    ``i*d_k:(i+1)*d_k`` of ``wq``, ``wk`` and ``wv``."""

    heads: int
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    bo: Tensor

    @property
    def dim(self):
        return self.wq.shape[0]


def init_mhsa(rng, dim, heads, std=None):
    if dim % heads:
        raise ConfigError(f"head count {heads} does not divide dim {dim}")
    std = 1.0 / math.sqrt(dim) if std is None else std
    w = lambda: Tensor(rng.normal(0.0, std, (dim, dim)), requires_grad=True)
    return MhsaParams(heads, w(), w(), w(), w(), Tensor(np.zeros(dim), requires_grad=True))


def to_tokens(f, mode):
    """[B, T, J, d] -> sequences of tokens: (B*T, J, d) or (B*J, T, d)."""
    B, T, J, d = f.shape
    if mode == "spatial":
        return tc.reshape(f, (B * T, J, d))
    if mode == "temporal":
        return tc.reshape(tc.transpose(f, (0, 2, 1, 3)), (B * J, T, d))
    raise ConfigError(f"unknown attention mode {mode!r}; expected one of {MODES}")


def from_tokens(x, shape, mode):
    B, T, J, d = shape
    if mode == "spatial":
        return tc.reshape(x, (B, T, J, d))
    return tc.transpose(tc.reshape(x, (B, J, T, d)), (0, 2, 1, 3))


def mhsa(f, params, mode, debug=None):
    """Multi-head self-attention over joints (spatial) or frames (temporal).

    If ``debug`` is a dict, the attention maps of shape
    (sequences, heads, tokens, tokens) are stored under ``"attention"``.
    """
    f = tc.as_tensor(f)
    if f.ndim != 4:
        raise DimensionError(f"mhsa expects [B, T, J, d], got {f.shape}")
    d, h = f.shape[-1], params.heads
    if d % h:
        raise ConfigError(f"head count {h} does not divide dim {d}")
    if params.dim != d:
        raise DimensionError(f"mhsa weights are {params.dim}-dim, features are {d}-dim")
    dk = d // h
    x = to_tokens(f, mode)
    n, L, _ = x.shape

    def heads(w):
        return tc.transpose(tc.reshape(tc.linear(x, w), (n, L, h, dk)), (0, 2, 1, 3))

    q, k, v = heads(params.wq), heads(params.wk), heads(params.wv)
    scores = tc.matmul(q, tc.swap_last(k)) * (1.0 / math.sqrt(dk))
    attn = tc.softmax_lastdim(scores)
    if debug is not None:
        debug["attention"] = attn.data
    ctx = tc.reshape(tc.transpose(tc.matmul(attn, v), (0, 2, 1, 3)), (n, L, d))
    out = tc.linear(ctx, params.wo, params.bo)
    return from_tokens(out, f.shape, mode)
