"""Training loop on (input2d, gt3d) sequence pairs."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError, NumericalError
from .losses import total_loss
from .metrics import evaluate, root_relative
from .model import forward, init_params, predict, topology_for
from .optim import AdamWState, adamw_step
from .params import zero_grads
from .skeleton import flip_values, normalized_adjacency
from .tensor import Tensor, backward


@dataclass
class TraceRow:
    step: int
    position: float
    delta: float
    total: float


@dataclass
class TrainResult:
    params: object
    trace: list
    state: AdamWState
    reduction: str = "mean"
    meta: dict = field(default_factory=dict)


def stack_dataset(pairs, config):
    """Stack sequence pairs into (inputs [N,T,J,3], root-relative targets [N,T,J,3])."""
    if not pairs:
        raise ContractError("dataset is empty")
    xs, ys = [], []
    for x, y in pairs:
        x = getattr(x, "values", x)
        y = getattr(y, "values", y)
        if x.shape != (config.frames, config.joints, 3) or y.shape != x.shape:
            raise DimensionError(f"sequence {x.shape}/{y.shape} does not match "
                                 f"T={config.frames}, J={config.joints}")
        xs.append(x)
        ys.append(y)
    topo = topology_for(config)
    return np.stack(xs), root_relative(np.stack(ys), topo.root_index)


def train_loop(pairs, config, steps, params=None, callback=None):
    """AdamW training; deterministic in ``config.seed``.

    Targets are root-relative ground truth. Each step draws ``batch_size``
    sequences (epoch-wise shuffling) and, when ``flip_augment`` is set,
    mirrors each sample with probability 0.5, input and target together.
    """
    X, Y = stack_dataset(pairs, config)
    topo = topology_for(config)
    a_hat = normalized_adjacency(topo)
    params = init_params(config) if params is None else params
    rng = np.random.default_rng(config.seed + 1)
    state = AdamWState()
    trace = []
    order = []
    batch = min(config.batch_size, len(X))
    for step in range(steps):
        if len(order) < batch:
            order.extend(rng.permutation(len(X)).tolist())
        idx, order = order[:batch], order[batch:]
        xb, yb = X[idx].copy(), Y[idx].copy()
        if config.flip_augment:
            flip = rng.random(batch) < 0.5
            if flip.any():
                xb[flip] = flip_values(xb[flip], topo, "input2d", config.image_width)
                yb[flip] = flip_values(yb[flip], topo, "gt3d")
        zero_grads(params)
        try:
            pred = forward(Tensor(xb), params, config, a_hat)
            loss, lp, ld = total_loss(pred, Tensor(yb), config.delta_weight, config.loss_reduction)
        except NumericalError as exc:
            raise NumericalError(f"step {step}: {exc}", step) from exc
        if not math.isfinite(loss.item()):
            raise NumericalError(f"step {step}: loss is not finite", step)
        trace.append(TraceRow(step, lp.item(), ld.item(), loss.item()))
        backward(loss)
        adamw_step(params, state, config.lr, config.weight_decay, config.beta1, config.beta2,
                   config.adam_eps)
        if callback is not None:
            callback(trace[-1])
    return TrainResult(params, trace, state, config.loss_reduction)


def predict_sequences(inputs, params, config, flip=False):
    """Root-relative 3D predictions for a stack of inputs [N, T, J, 3].

    With ``flip`` the prediction on the mirrored input is mirrored back and
    averaged with the direct prediction.
    """
    topo = topology_for(config)
    pred = predict(inputs, params, config)
    if flip:
        mirrored = predict(flip_values(inputs, topo, "input2d", config.image_width), params, config)
        pred = 0.5 * (pred + flip_values(mirrored, topo, "pred3d"))
    return root_relative(pred, topo.root_index)


def evaluate_params(pairs, params, config, flip=False, scale=True):
    X, Y = stack_dataset(pairs, config)
    P = predict_sequences(X, params, config, flip)
    return evaluate(list(P), list(Y), topology_for(config).root_index, scale)
