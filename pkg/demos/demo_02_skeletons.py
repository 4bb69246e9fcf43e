"""
Synthetic skeleton sequences
============================

Ground truth comes from forward kinematics on a 17-joint skeleton with smooth
joint rotations; the 2D input is a pinhole projection of it, optionally with
pixel noise. Sequences are stored in the little MTGF container.
"""

import tempfile
from pathlib import Path

import numpy as np

from mixtgformer.skeleton import (CameraModel, flip_horizontal, human36m_topology,
                                  load_sequence, normalized_adjacency, project, save_sequence,
                                  synth_sequence)

topo = human36m_topology()
cam = CameraModel()
x2d, gt = synth_sequence(seed=3, topo=topo, T=27, cam=cam, noise_std=2.0)
print("input2d", x2d.values.shape, "gt3d", gt.values.shape)

# bones keep their length in every frame
lengths = np.stack([np.linalg.norm(gt.values[:, a] - gt.values[:, b], axis=-1)
                    for a, b in topo.edges], axis=1)
print("bone length spread (mm):", np.ptp(lengths, axis=0).max())

# noise shows up as reprojection error and as lowered confidence
err = np.linalg.norm(project(gt.values, cam) - x2d.values[..., :2], axis=-1)
print(f"mean pixel noise {err.mean():.2f}, mean confidence {x2d.values[..., 2].mean():.3f}")

###############################################################################
# Mirroring swaps left and right joints; in 3D it negates camera x.
mirrored = flip_horizontal(gt, topo)
wrist = topo.names.index("l_wrist")
print("left wrist", gt.values[0, wrist], "-> right wrist slot", mirrored.values[0, wrist + 3])

###############################################################################
# The skeleton graph used by the spatial GCN
a_hat = normalized_adjacency(topo).data
print("largest eigenvalue of the normalised adjacency:", np.linalg.eigvalsh(a_hat).max())

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "seq.mtgf"
    save_sequence(path, gt)
    print("file bytes", path.stat().st_size, "roundtrip equal:",
          load_sequence(path).values.tobytes() == gt.values.tobytes())
