"""Independent reference implementations for the metric checks.

None of these share code with the library: loops instead of vector ops, the
quaternion route instead of SVD for alignment.
"""

import numpy as np
from scipy.spatial.transform import Rotation

from mixtgformer.skeleton import human36m_topology, synth_sequence

H36M = human36m_topology()


def loop_mpjpe(pred, gt, root=0):
    total, n = 0.0, 0
    for p, g in zip(pred.reshape(-1, *pred.shape[-2:]), gt.reshape(-1, *gt.shape[-2:])):
        for j in range(p.shape[0]):
            d = (p[j] - p[root]) - (g[j] - g[root])
            total += np.sqrt(d @ d)
            n += 1
    return total / n


def horn_align(p, g, scale=True):
    """Quaternion (Horn) closed form, independent of the SVD route."""
    p0, g0 = p - p.mean(0), g - g.mean(0)
    S = p0.T @ g0
    Sxx, Sxy, Sxz, Syx, Syy, Syz, Szx, Szy, Szz = S.reshape(-1)
    N = np.array([
        [Sxx + Syy + Szz, Syz - Szy, Szx - Sxz, Sxy - Syx],
        [Syz - Szy, Sxx - Syy - Szz, Sxy + Syx, Szx + Sxz],
        [Szx - Sxz, Sxy + Syx, -Sxx + Syy - Szz, Syz + Szy],
        [Sxy - Syx, Szx + Sxz, Syz + Szy, -Sxx - Syy + Szz]])
    w, v = np.linalg.eigh(N)
    q0, qx, qy, qz = v[:, np.argmax(w)]
    R = Rotation.from_quat([qx, qy, qz, q0]).as_matrix()
    rotated = p0 @ R.T
    s = np.sum(rotated * g0) / np.sum(p0 * p0) if scale else 1.0
    return s * rotated + g.mean(0)


def oracle_p_mpjpe(pred, gt, scale=True):
    errs = [np.linalg.norm(horn_align(p, g, scale) - g, axis=-1)
            for p, g in zip(pred.reshape(-1, 17, 3), gt.reshape(-1, 17, 3))]
    return float(np.mean(errs))


def oracle_pck_auc(pred, gt):
    errs = []
    for p, g in zip(pred.reshape(-1, 17, 3), gt.reshape(-1, 17, 3)):
        for j in range(17):
            errs.append(np.linalg.norm((p[j] - p[0]) - (g[j] - g[0])))
    pck = lambda th: 100.0 * sum(1 for e in errs if e < th) / len(errs)
    return pck(150.0), sum(pck(th) for th in range(5, 151, 5)) / 30


def random_pairs(n=100, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        _, gt = synth_sequence(seed * 1000 + i, H36M, 3)
        pred = gt.values + rng.normal(0, rng.uniform(5, 120), gt.values.shape)
        pairs.append((pred, gt.values))
    return pairs


def random_similarity(rng):
    return Rotation.random(random_state=rng.integers(2 ** 31)).as_matrix(), \
        rng.uniform(0.3, 3.0), rng.normal(0, 500, 3)
