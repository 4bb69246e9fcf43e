"""Shared builders for training and CLI tests."""

import numpy as np

from mixtgformer.config import ModelConfig
from mixtgformer.model import init_params
from mixtgformer.skeleton import human36m_topology, synth_sequence

TOY = ModelConfig(frames=4, dim=16, motion_dim=8, layers=1, heads=2, batch_size=2)


def toy_pairs(count=2, frames=4, noise=0.0, seed=0):
    topo = human36m_topology()
    return [synth_sequence(seed + i, topo, frames, noise_std=noise) for i in range(count)]


def symmetric_params(config):
    """Parameters whose predictions commute with the horizontal flip.

    The input projection ignores the image x channel, the spatial embedding is
    symmetric under the left/right swap (a skeleton automorphism) and the head
    emits zero x, so mirroring the input just permutes the output joints.
    """
    params = init_params(config)
    params.proj.w.data[0] = 0.0
    params.head.w.data[:, 0] = 0.0
    params.head.b.data[0] = 0.0
    if params.spatial_pos is not None:
        perm = human36m_topology().flip_permutation()
        pos = params.spatial_pos.data
        params.spatial_pos.data = 0.5 * (pos + pos[:, perm])
    return params


def trace_rows(text):
    return [tuple(float(v) for v in line.split()) for line in text.splitlines()
            if line.strip() and not line.startswith("#")]


__all__ = ["TOY", "toy_pairs", "symmetric_params", "trace_rows", "np"]
