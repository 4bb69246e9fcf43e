"""Full lifting network: projection, embeddings, stacked Mixformer layers, heads."""

from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .config import ModelConfig
from .errors import DimensionError
from .mixformer import init_layer, layer_param_count, mixformer_layer
from .params import LinearParams, init_linear, named_tensors, param_count
from .skeleton import chain_topology, human36m_topology, normalized_adjacency
from .tensor import Tensor


@dataclass
class ModelParams:
    proj: LinearParams
    spatial_pos: Tensor
    temporal_pos: Tensor
    layers: list
    motion: LinearParams
    head: LinearParams

    def named_tensors(self):
        return list(named_tensors(self))


def topology_for(config):
    if config.topology == "h36m" or (config.topology == "auto" and config.joints == 17):
        return human36m_topology()
    return chain_topology(config.joints)


def init_params(config, seed=None):
    rng = np.random.default_rng(config.seed if seed is None else seed)
    c = config
    spatial = c.embedding_mode in ("spatial", "both")
    temporal = c.embedding_mode in ("temporal", "both")
    return ModelParams(
        proj=init_linear(rng, 3, c.dim, c.init_std),
        spatial_pos=Tensor(rng.normal(0.0, 0.02, (1, c.joints, c.dim)), True) if spatial else None,
        temporal_pos=Tensor(rng.normal(0.0, 0.02, (1, c.frames, c.dim)), True) if temporal else None,
        layers=[init_layer(rng, c.dim, c.heads, c.stream_order, c.se_position,
                           c.branch_composition, c.mlp_ratio, c.se_reduction, c.neighbors,
                           c.gcn_activation, c.init_std)
                for _ in range(c.layers)],
        motion=init_linear(rng, c.dim, c.motion_dim, c.init_std),
        head=init_linear(rng, c.motion_dim, 3, c.init_std),
    )


def normalize_input(x, config):
    """Pixels to [-1, 1] by image size; confidence passes through unchanged."""
    scale = np.array([2.0 / config.image_width, 2.0 / config.image_height, 1.0])
    shift = np.array([-1.0, -1.0, 0.0])
    return x * scale + shift


def forward(x, params, config, a_hat=None, debug=None):
    """Lift 2D keypoints [B, T, J, 3] (pixels, confidence) to 3D [B, T, J, 3] in mm."""
    x = tc.as_tensor(x)
    expected = (config.frames, config.joints, 3)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise DimensionError(f"input {x.shape} does not match [B, {expected[0]}, {expected[1]}, 3]")
    if a_hat is None:
        a_hat = normalized_adjacency(topology_for(config))
    h = params.proj(normalize_input(x, config) if config.normalize_input else x)
    if params.spatial_pos is not None:
        h = h + params.spatial_pos
    if params.temporal_pos is not None:
        h = h + tc.reshape(params.temporal_pos, (1, config.frames, 1, config.dim))
    for layer in params.layers:
        h = mixformer_layer(h, layer, a_hat, debug)
    motion = tc.tanh(params.motion(h))
    if debug is not None:
        debug["motion"] = motion.data
    return params.head(motion) * config.output_scale


def predict(x, params, config):
    """Forward on a numpy batch without building a graph."""
    return forward(Tensor(x), params, config).data


def closed_form_param_count(config):
    """Analytic scalar-parameter count for ``init_params(config)``."""
    c = config
    d = c.dim
    n = 3 * d + d
    if c.embedding_mode in ("spatial", "both"):
        n += c.joints * d
    if c.embedding_mode in ("temporal", "both"):
        n += c.frames * d
    n += c.layers * layer_param_count(d, c.heads, c.stream_order, c.se_position,
                                      c.branch_composition, c.mlp_ratio, c.se_reduction)
    n += d * c.motion_dim + c.motion_dim
    n += c.motion_dim * 3 + 3
    return n


REFERENCE_PARAMS = 15.7e6


def reference_shape_config(target=REFERENCE_PARAMS, heads=8, motion_dim=512):
    """The large reference shape (16 layers, 243 frames, 17 joints).

    Its embedding and motion widths are unknown. The motion width is
    fixed at 512 and the embedding width is the multiple of ``heads`` (and of
    the SE reduction) whose closed-form count is nearest ``target``.
    """
    base = ModelConfig(frames=243, joints=17, layers=16, heads=heads, motion_dim=motion_dim,
                       dim=heads * 4)
    best = None
    for dim in range(heads * 4, 1025, heads * 4):
        cfg = base.replace(dim=dim)
        gap = abs(closed_form_param_count(cfg) - target)
        if best is None or gap < best[0]:
            best = (gap, cfg)
    return best[1]


__all__ = ["ModelParams", "init_params", "forward", "predict", "topology_for",
           "closed_form_param_count", "reference_shape_config", "param_count", "normalize_input"]
