"""Pose-error metrics on numpy arrays of shape (..., J, 3), in millimetres."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, DimensionError

PCK_THRESHOLD = 150.0
AUC_THRESHOLDS = np.arange(5.0, 151.0, 5.0)


@dataclass
class MetricsReport:
    mpjpe: float
    p_mpjpe: float
    pck150: float
    auc: float
    per_sequence: list = field(default_factory=list)

    def as_dict(self):
        return {"mpjpe": self.mpjpe, "p_mpjpe": self.p_mpjpe,
                "pck150": self.pck150, "auc": self.auc}


def _check(pred, gt):
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim < 2 or pred.shape[-1] != 3:
        raise DimensionError(f"prediction {pred.shape} vs target {gt.shape}")
    return pred, gt


def root_relative(x, root=0):
    return x - x[..., root:root + 1, :]


def joint_errors(pred, gt, root=0):
    """Per-joint Euclidean error after subtracting each pose's root joint."""
    pred, gt = _check(pred, gt)
    return np.linalg.norm(root_relative(pred, root) - root_relative(gt, root), axis=-1)


def mpjpe(pred, gt, root=0):
    return float(joint_errors(pred, gt, root).mean())


def procrustes_align(pred, gt, scale=True):
    """Align one (J, 3) frame of ``pred`` to ``gt`` by least squares.

    Finds rotation R (det +1), translation t and, when ``scale`` is set, a
    uniform factor s minimising ||s * pred @ R + t - gt||_F.
    """
    pred, gt = _check(pred, gt)
    if pred.ndim != 2:
        raise DimensionError("procrustes_align works on a single (J, 3) frame")
    if pred.shape[0] < 3:
        raise DegeneracyError("alignment needs at least three joints")
    mu_p, mu_g = pred.mean(axis=0), gt.mean(axis=0)
    p0, g0 = pred - mu_p, gt - mu_g
    norm_g = np.sum(g0 * g0)
    norm_p = np.sum(p0 * p0)
    if norm_g <= 1e-24 * max(1.0, np.abs(gt).max() ** 2):
        raise DegeneracyError("target joints all coincide")
    if norm_p == 0.0:
        return np.broadcast_to(mu_g, gt.shape).copy()
    U, S, Vt = np.linalg.svd(p0.T @ g0)
    D = np.ones(3)
    D[2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    R = (U * D) @ Vt
    s = float((S * D).sum() / norm_p) if scale else 1.0
    return s * p0 @ R + mu_g


def p_mpjpe(pred, gt, scale=True):
    """Mean per-joint error after per-frame Procrustes alignment."""
    pred, gt = _check(pred, gt)
    J = pred.shape[-2]
    P, G = pred.reshape(-1, J, 3), gt.reshape(-1, J, 3)
    errs = [np.linalg.norm(procrustes_align(p, g, scale) - g, axis=-1) for p, g in zip(P, G)]
    return float(np.mean(errs))


def pck_auc(pred, gt, root=0):
    """(PCK at 150 mm, mean PCK over 5..150 mm) as percentages."""
    err = joint_errors(pred, gt, root).reshape(-1)
    pck = 100.0 * float(np.mean(err < PCK_THRESHOLD))
    curve = (err[None, :] < AUC_THRESHOLDS[:, None]).mean(axis=1)
    return pck, 100.0 * float(curve.mean())


def evaluate(preds, gts, root=0, scale=True):
    """Metrics over a list of (T, J, 3) sequence pairs, pooled over all joints."""
    per_seq = []
    all_p, all_g = [], []
    for p, g in zip(preds, gts):
        p, g = _check(p, g)
        pck, auc = pck_auc(p, g, root)
        per_seq.append({"mpjpe": mpjpe(p, g, root), "p_mpjpe": p_mpjpe(p, g, scale),
                        "pck150": pck, "auc": auc})
        all_p.append(p)
        all_g.append(g)
    P, G = np.concatenate(all_p), np.concatenate(all_g)
    pck, auc = pck_auc(P, G, root)
    return MetricsReport(mpjpe(P, G, root), p_mpjpe(P, G, scale), pck, auc, per_seq)
