"""Position and frame-difference losses on [B, T, J, 3] tensors."""

from . import tensor as tc
from .errors import ConfigError, DimensionError


def _reduce(per_joint, reduction):
    if reduction == "sum":
        return tc.tsum(per_joint)
    if reduction == "mean":
        return tc.mean(per_joint)
    raise ConfigError(f"unknown reduction {reduction!r}")


def loss_position(pred, gt, reduction="sum"):
    """Sum (or mean) over frames and joints of the per-joint Euclidean error."""
    pred, gt = tc.as_tensor(pred), tc.as_tensor(gt)
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction {pred.shape} vs target {gt.shape}")
    return _reduce(tc.norm_lastdim(pred - gt), reduction)


def loss_delta(pred, gt, reduction="sum"):
    """Error between consecutive-frame differences of prediction and target.

    With a single frame the sum is empty and the loss is zero. The mean
    divides by B * T * J, like the position loss, so the two terms share a
    scale.
    """
    pred, gt = tc.as_tensor(pred), tc.as_tensor(gt)
    if pred.shape != gt.shape:
        raise DimensionError(f"prediction {pred.shape} vs target {gt.shape}")
    if pred.shape[1] < 2:
        return tc.tsum(pred * 0.0)
    d_pred = pred[:, 1:] - pred[:, :-1]
    d_gt = gt[:, 1:] - gt[:, :-1]
    err = tc.norm_lastdim(d_pred - d_gt)
    if reduction == "mean":
        B, T, J, _ = pred.shape
        return tc.tsum(err) * (1.0 / (B * T * J))
    return _reduce(err, reduction)


def total_loss(pred, gt, delta_weight=1.0, reduction="sum"):
    """Returns ``(total, position, delta)``."""
    if delta_weight < 0:
        raise ConfigError("delta weight must be non-negative")
    lp = loss_position(pred, gt, reduction)
    if delta_weight == 0:
        return lp, lp, loss_delta(pred, gt, reduction)
    ld = loss_delta(pred, gt, reduction)
    return lp + ld * delta_weight, lp, ld
