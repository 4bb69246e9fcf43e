"""Graph convolution over the skeleton (spatial) and over frames (temporal)."""

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .errors import ConfigError, DimensionError
from .tensor import Tensor


@dataclass
class GcnParams:
    w1: Tensor
    w2: Tensor
    gamma: Tensor
    beta: Tensor
    activation: str = "gelu"


@dataclass(frozen=True)
class TemporalAdjacencySpec:
    neighbors: int = 3
    include_self: bool = True

    def __post_init__(self):
        if self.neighbors < 1:
            raise ConfigError("temporal neighbour count must be positive")
        if not self.include_self:
            raise ConfigError("the temporal graph always keeps self-loops")


def init_gcn(rng, dim, activation="gelu", std=None):
    std = 1.0 / math.sqrt(dim) if std is None else std
    w = lambda: Tensor(rng.normal(0.0, std, (dim, dim)), requires_grad=True)
    return GcnParams(w(), w(), Tensor(np.ones(dim), requires_grad=True),
                     Tensor(np.zeros(dim), requires_grad=True), activation)


def _gcn_update(f, aggregated, params):
    """sigma(F + Norm(aggregated @ W1 + F @ W2)) on the last axis."""
    inner = tc.linear(aggregated, params.w1) + tc.linear(f, params.w2)
    return tc.activation(params.activation,
                         f + tc.layer_norm(inner, params.gamma, params.beta))


def spatial_gcn(f, a_hat, params):
    f, a_hat = tc.as_tensor(f), tc.as_tensor(a_hat)
    J = f.shape[2]
    if a_hat.shape != (J, J):
        raise DimensionError(f"adjacency {a_hat.shape} does not match {J} joints")
    return _gcn_update(f, tc.matmul(a_hat, f), params)


def temporal_adjacency(f, spec=TemporalAdjacencySpec(), debug=None):
    """Per-joint frame graph [B, J, T, T] from feature dot-product similarity.

    Each row keeps its own frame and the ``k - 1`` most similar other frames
    (ties go to the lower frame index); kept similarities are softmaxed.
    The selection is constant under differentiation, the weights are not.
    """
    f = tc.as_tensor(f)
    T = f.shape[1]
    k = spec.neighbors
    if k > T:
        raise ConfigError(f"temporal neighbour count {k} exceeds frame count {T}")
    ft = tc.transpose(f, (0, 2, 1, 3))
    sim = tc.matmul(ft, tc.swap_last(ft))
    ranked = -sim.data
    diag = np.arange(T)
    ranked[..., diag, diag] = -np.inf
    keep = np.argsort(ranked, axis=-1, kind="stable")[..., :k]
    mask = np.zeros(sim.shape, dtype=bool)
    np.put_along_axis(mask, keep, True, axis=-1)
    adj = tc.masked_softmax_lastdim(sim, mask)
    if debug is not None:
        debug["temporal_adjacency"] = adj.data
    return adj


def temporal_gcn(f, adj, params):
    f, adj = tc.as_tensor(f), tc.as_tensor(adj)
    B, T, J, _ = f.shape
    if adj.shape != (B, J, T, T):
        raise DimensionError(f"temporal adjacency {adj.shape} does not match {(B, J, T, T)}")
    ft = tc.transpose(f, (0, 2, 1, 3))
    out = _gcn_update(ft, tc.matmul(adj, ft), params)
    return tc.transpose(out, (0, 2, 1, 3))
