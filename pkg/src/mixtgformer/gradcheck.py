"""Finite-difference verification of every differentiable component.

Each component builds a scalar loss at a toy shape (tensor outputs are
contracted with a fixed random weighting) and compares analytic gradients
with central differences using max |analytic - numeric| / max(1, |numeric|).
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .attention import init_mhsa, mhsa
from .config import ModelConfig
from .graph_conv import (TemporalAdjacencySpec, init_gcn, spatial_gcn, temporal_adjacency,
                         temporal_gcn)
from .losses import total_loss
from .mixformer import adaptive_fuse, init_block, init_layer, init_se, mixformer_block, \
    mixformer_layer, se_layer
from .model import forward, init_params, topology_for
from .params import init_linear, named_tensors
from .skeleton import chain_topology, normalized_adjacency
from .tensor import Tensor, backward, finite_diff_grad

PRIMITIVE = "primitive"
COMPOSITE = "composite"


@dataclass
class CheckResult:
    name: str
    kind: str
    error: float
    worst_tensor: str

    def passed(self, tolerance):
        return self.error < tolerance


def check_gradients(loss_fn, tensors, max_coords=None, seed=0):
    """Worst relative error over ``tensors`` (list of (name, Tensor)).

    With ``max_coords`` only that many randomly chosen coordinates per
    tensor are differenced.
    """
    rng = np.random.default_rng(seed)
    for _, t in tensors:
        t.grad = None
    backward(loss_fn())
    worst, worst_name = 0.0, ""
    for name, t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        n = t.size
        coords = np.arange(n) if max_coords is None or n <= max_coords else \
            np.sort(rng.choice(n, max_coords, replace=False))

        def f(arr, t=t):
            saved = t.data
            t.data = arr
            try:
                return loss_fn().item()
            finally:
                t.data = saved

        numeric = finite_diff_grad(f, t.data, coords=coords)
        a = analytic.reshape(-1)[coords]
        err = float(np.max(np.abs(a - numeric) / np.maximum(1.0, np.abs(numeric))))
        if err >= worst:
            worst, worst_name = err, name
    return worst, worst_name


def _leaf(rng, *shape, low=-2.0, high=2.0):
    return Tensor(rng.uniform(low, high, shape), requires_grad=True)


def _contract(out, rng):
    weights = rng.normal(size=out.shape)
    return lambda y: tc.tsum(y * weights)


def _away_from_zero(rng, *shape):
    x = rng.uniform(-2.0, 2.0, shape)
    return Tensor(np.sign(x) * (0.1 + np.abs(x)), requires_grad=True)


def _primitive_cases():
    """name -> builder(rng) returning (loss_fn, [(name, tensor)])."""

    def unary(fn, make=_leaf, shape=(3, 4)):
        def build(rng):
            x = make(rng, *shape)
            w = rng.normal(size=fn(x).shape)
            return lambda: tc.tsum(fn(x) * w), [("x", x)]
        return build

    def binary(fn, sa, sb, make_b=_leaf):
        def build(rng):
            a, b = _leaf(rng, *sa), make_b(rng, *sb)
            w = rng.normal(size=fn(a, b).shape)
            return lambda: tc.tsum(fn(a, b) * w), [("a", a), ("b", b)]
        return build

    def layer_norm_case(rng):
        x, g, b = _leaf(rng, 2, 3, 5), _leaf(rng, 5), _leaf(rng, 5)
        w = rng.normal(size=(2, 3, 5))
        return lambda: tc.tsum(tc.layer_norm(x, g, b) * w), [("x", x), ("gamma", g), ("beta", b)]

    def linear_case(rng):
        x, W, b = _leaf(rng, 2, 3, 4), _leaf(rng, 4, 5), _leaf(rng, 5)
        w = rng.normal(size=(2, 3, 5))
        return lambda: tc.tsum(tc.linear(x, W, b) * w), [("x", x), ("w", W), ("b", b)]

    def masked_case(rng):
        x = _leaf(rng, 2, 4)
        mask = np.array([[1, 0, 1, 1], [0, 1, 0, 0]], dtype=bool)
        w = rng.normal(size=(2, 4))
        return lambda: tc.tsum(tc.masked_softmax_lastdim(x, mask) * w), [("x", x)]

    def concat_case(rng):
        a, b = _leaf(rng, 2, 3), _leaf(rng, 2, 2)
        w = rng.normal(size=(2, 5))
        return lambda: tc.tsum(tc.concat([a, b], axis=-1) * w), [("a", a), ("b", b)]

    def shape_case(rng):
        x = _leaf(rng, 2, 3, 4)
        w = rng.normal(size=(4, 6))
        fn = lambda: tc.tsum(tc.reshape(tc.transpose(x, (2, 0, 1)), (4, 6)) * w)
        return fn, [("x", x)]

    def reduce_case(rng):
        x = _leaf(rng, 2, 3, 4)
        w = rng.normal(size=(2, 1, 4))
        return lambda: tc.tsum(tc.mean(x, axis=1, keepdims=True) * w) + tc.tsum(x), [("x", x)]

    def slice_case(rng):
        x = _leaf(rng, 3, 4)
        w = rng.normal(size=(2, 4))
        return lambda: tc.tsum((x[1:] - x[:-1]) * w), [("x", x)]

    return {
        "add": binary(tc.add, (2, 3, 4), (3, 1)),
        "sub": binary(tc.sub, (2, 3), (2, 3)),
        "mul": binary(tc.mul, (2, 3, 4), (1, 4)),
        "div": binary(tc.div, (2, 3), (2, 3), make_b=lambda rng, *s: Tensor(
            rng.uniform(0.5, 2.0, s), requires_grad=True)),
        "exp": unary(tc.exp),
        "square": unary(tc.square),
        "reshape_transpose": shape_case,
        "getitem": slice_case,
        "concat": concat_case,
        "sum_mean": reduce_case,
        "norm": unary(tc.norm_lastdim),
        "matmul": binary(tc.matmul, (2, 3, 4), (4, 5)),
        "linear": linear_case,
        "softmax_lastdim": unary(tc.softmax_lastdim, shape=(3, 5)),
        "masked_softmax": masked_case,
        "layer_norm": layer_norm_case,
        "relu": unary(tc.relu, make=_away_from_zero),
        "tanh": unary(tc.tanh),
        "sigmoid": unary(tc.sigmoid),
        "gelu": unary(tc.gelu),
    }


def _composite_cases(config):
    d, h = 8, 2

    def with_input(rng, shape):
        return _leaf(rng, *shape, low=-1.0, high=1.0)

    def contracted(rng, f, params, fn):
        out = fn()
        w = rng.normal(size=out.shape)
        return lambda: tc.tsum(fn() * w), [("f", f)] + list(named_tensors(params))

    def mhsa_case(mode):
        def build(rng):
            f = with_input(rng, (1, 2, 3, d))
            p = init_mhsa(rng, d, h)
            return contracted(rng, f, p, lambda: mhsa(f, p, mode))
        return build

    def sgcn_case(rng):
        f = with_input(rng, (1, 2, 4, d))
        p = init_gcn(rng, d)
        a = normalized_adjacency(chain_topology(4))
        return contracted(rng, f, p, lambda: spatial_gcn(f, a, p))

    def tgcn_case(rng):
        f = with_input(rng, (1, 3, 2, 4))
        p = init_gcn(rng, 4)
        spec = TemporalAdjacencySpec(2)
        return contracted(rng, f, p, lambda: temporal_gcn(f, temporal_adjacency(f, spec), p))

    def fuse_case(rng):
        fa, fb = with_input(rng, (1, 2, 3, 4)), with_input(rng, (1, 2, 3, 4))
        w = init_linear(rng, 8, 2)
        weights = rng.normal(size=fa.shape)
        fn = lambda: tc.tsum(adaptive_fuse(fa, fb, w) * weights)
        return fn, [("fa", fa), ("fb", fb)] + list(named_tensors(w))

    def se_case(rng):
        f = with_input(rng, (2, 3, 4, d))
        p = init_se(rng, d, 2)
        return contracted(rng, f, p, lambda: se_layer(f, p))

    def block_case(mode):
        def build(rng):
            f = with_input(rng, (1, 3, 4, d))
            p = init_block(rng, d, h, mode, config.branch_composition, 2, 2,
                           config.gcn_activation)
            a = normalized_adjacency(chain_topology(4))
            return contracted(rng, f, p, lambda: mixformer_block(f, p, a))
        return build

    def layer_case(rng):
        f = with_input(rng, (1, 3, 4, d))
        p = init_layer(rng, d, h, config.stream_order, config.se_position,
                       config.branch_composition, 2, 2, 2, config.gcn_activation)
        a = normalized_adjacency(chain_topology(4))
        return contracted(rng, f, p, lambda: mixformer_layer(f, p, a))

    return {
        "mhsa_spatial": mhsa_case("spatial"),
        "mhsa_temporal": mhsa_case("temporal"),
        "spatial_gcn": sgcn_case,
        "temporal_gcn": tgcn_case,
        "adaptive_fuse": fuse_case,
        "se_layer": se_case,
        "mixformer_block_spatial": block_case("spatial"),
        "mixformer_block_temporal": block_case("temporal"),
        "mixformer_layer": layer_case,
    }


def tiny_model_config(base=None):
    """The small full-model shape used for gradient checks, keeping ``base``'s toggles."""
    base = base or ModelConfig()
    return base.replace(frames=4, joints=5, dim=8, motion_dim=4, layers=1, heads=2,
                        neighbors=min(base.neighbors, 4), se_reduction=2, mlp_ratio=2,
                        topology="chain", batch_size=1)


def full_model_check(config, max_coords=None, seed=0):
    rng = np.random.default_rng(seed)
    params = init_params(config, seed)
    B, T, J = 1, config.frames, config.joints
    x = np.concatenate([rng.uniform(0, config.image_width, (B, T, J, 1)),
                        rng.uniform(0, config.image_height, (B, T, J, 1)),
                        rng.uniform(0.2, 1.0, (B, T, J, 1))], axis=-1)
    x = Tensor(x, requires_grad=True)
    gt = Tensor(rng.normal(0.0, 300.0, (B, T, J, 3)))
    a_hat = normalized_adjacency(topology_for(config))

    def loss_fn():
        pred = forward(x, params, config, a_hat)
        return total_loss(pred, gt, config.delta_weight, "mean")[0]

    return check_gradients(loss_fn, [("input", x)] + params.named_tensors(), max_coords, seed)


def run_suite(config=None, components=None, max_coords=None, seed=0, model_coords=None):
    """Run every check (or the named subset) and return a list of CheckResult.

    ``config`` supplies the ablation toggles for block/layer checks and the
    full-model shape; by default the tiny gradient-check shape is used.
    """
    config = config or tiny_model_config()
    cases = [(name, PRIMITIVE, b) for name, b in _primitive_cases().items()]
    cases += [(name, COMPOSITE, b) for name, b in _composite_cases(config).items()]
    results = []
    for i, (name, kind, build) in enumerate(cases):
        if components is not None and name not in components:
            continue
        rng = np.random.default_rng(seed + 1000 * i)
        loss_fn, tensors = build(rng)
        err, worst = check_gradients(loss_fn, tensors, max_coords, seed + i)
        results.append(CheckResult(name, kind, err, worst))
    if components is None or "full_model" in components:
        err, worst = full_model_check(config, model_coords, seed)
        results.append(CheckResult("full_model", COMPOSITE, err, worst))
    return results
