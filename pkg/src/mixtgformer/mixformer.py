"""Mixformer blocks, the SE channel-attention layer and the dual-stream layer."""

from dataclasses import dataclass, field

from . import tensor as tc
from .attention import MhsaParams, init_mhsa, mhsa
from .errors import ConfigError, DimensionError
from .graph_conv import (GcnParams, TemporalAdjacencySpec, init_gcn, spatial_gcn,
                         temporal_adjacency, temporal_gcn)
from .params import LinearParams, NormParams, init_linear, init_norm

BRANCH_COMPOSITIONS = ("attention_gcn", "double_attention", "double_gcn")
SE_POSITIONS = ("none", "before_fusion", "between_blocks", "after_fusion")

# stream order -> block modes of each stream
STREAM_ORDERS = {
    "st_ts": (("spatial", "temporal"), ("temporal", "spatial")),
    "st_st": (("spatial", "temporal"), ("spatial", "temporal")),
    "ts_ts": (("temporal", "spatial"), ("temporal", "spatial")),
    "ss_ss": (("spatial", "spatial"), ("spatial", "spatial")),
    "tt_tt": (("temporal", "temporal"), ("temporal", "temporal")),
    "single": (("spatial", "temporal"),),
}

_BRANCH_KINDS = {
    "attention_gcn": ("attention", "gcn"),
    "double_attention": ("attention", "attention"),
    "double_gcn": ("gcn", "gcn"),
}


def se_sites(stream_order, se_position):
    """Number of SE modules a layer holds for the given placement."""
    streams = len(STREAM_ORDERS[stream_order])
    return {"none": 0, "after_fusion": 1}.get(se_position, streams)


@dataclass
class SeParams:
    fc1: LinearParams
    fc2: LinearParams

    @property
    def reduction(self):
        return self.fc1.w.shape[0] // self.fc1.w.shape[1]


@dataclass
class MixformerBlockParams:
    mode: str
    composition: str
    branch1: object
    branch2: object
    fuse: LinearParams
    norm1: NormParams
    norm2: NormParams
    mlp1: LinearParams
    mlp2: LinearParams
    neighbors: int = 3


@dataclass
class MixformerLayerParams:
    stream_order: str
    se_position: str
    stream_a: list
    stream_b: list
    fuse: LinearParams
    se: list = field(default_factory=list)
    fc: LinearParams = None


def init_se(rng, dim, reduction=4, std=None):
    if dim % reduction:
        raise ConfigError(f"SE reduction {reduction} does not divide dim {dim}")
    hidden = dim // reduction
    return SeParams(init_linear(rng, dim, hidden, std), init_linear(rng, hidden, dim, std))


def init_block(rng, dim, heads, mode, composition="attention_gcn", mlp_ratio=4,
               neighbors=3, gcn_activation="gelu", std=None):
    if mode not in ("spatial", "temporal"):
        raise ConfigError(f"unknown block mode {mode!r}")
    if composition not in _BRANCH_KINDS:
        raise ConfigError(f"unknown branch composition {composition!r}; "
                          f"expected one of {BRANCH_COMPOSITIONS}")
    make = {"attention": lambda: init_mhsa(rng, dim, heads, std),
            "gcn": lambda: init_gcn(rng, dim, gcn_activation, std)}
    kind1, kind2 = _BRANCH_KINDS[composition]
    return MixformerBlockParams(
        mode=mode,
        composition=composition,
        branch1=make[kind1](),
        branch2=make[kind2](),
        fuse=init_linear(rng, 2 * dim, 2, std),
        norm1=init_norm(dim),
        norm2=init_norm(dim),
        mlp1=init_linear(rng, dim, mlp_ratio * dim, std),
        mlp2=init_linear(rng, mlp_ratio * dim, dim, std),
        neighbors=neighbors,
    )


def init_layer(rng, dim, heads, stream_order="st_ts", se_position="after_fusion",
               composition="attention_gcn", mlp_ratio=4, se_reduction=4, neighbors=3,
               gcn_activation="gelu", std=None):
    if stream_order not in STREAM_ORDERS:
        raise ConfigError(f"unknown stream order {stream_order!r}; "
                          f"expected one of {tuple(STREAM_ORDERS)}")
    if se_position not in SE_POSITIONS:
        raise ConfigError(f"unknown SE position {se_position!r}; expected one of {SE_POSITIONS}")
    streams = [
        [init_block(rng, dim, heads, mode, composition, mlp_ratio, neighbors, gcn_activation, std)
         for mode in modes]
        for modes in STREAM_ORDERS[stream_order]
    ]
    dual = len(streams) == 2
    return MixformerLayerParams(
        stream_order=stream_order,
        se_position=se_position,
        stream_a=streams[0],
        stream_b=streams[1] if dual else [],
        fuse=init_linear(rng, 2 * dim, 2, std) if dual else None,
        se=[init_se(rng, dim, se_reduction, std)
            for _ in range(se_sites(stream_order, se_position))],
        fc=init_linear(rng, dim, dim, std),
    )


def adaptive_fuse(fa, fb, w, debug=None):
    """Per-position convex blend of two feature maps.

    The blend weights are a softmax over the two logits that ``w`` produces
    from the channel-wise concatenation of the inputs.
    """
    fa, fb = tc.as_tensor(fa), tc.as_tensor(fb)
    if fa.shape != fb.shape:
        raise DimensionError(f"adaptive_fuse: {fa.shape} vs {fb.shape}")
    alpha = tc.softmax_lastdim(w(tc.concat([fa, fb], axis=-1)))
    if debug is not None:
        debug.setdefault("alpha", []).append(alpha.data)
    return fa * alpha[..., 0:1] + fb * alpha[..., 1:2]


def se_layer(x, params, debug=None):
    """Squeeze (mean over frames and joints), excite (bottleneck MLP, sigmoid), scale."""
    x = tc.as_tensor(x)
    d = x.shape[-1]
    hidden = params.fc1.w.shape[1]
    if params.fc1.w.shape[0] != d or d % hidden:
        raise ConfigError(f"SE bottleneck {hidden} does not divide dim {d}")
    squeezed = tc.mean(x, axis=(1, 2), keepdims=True)
    excited = tc.sigmoid(params.fc2(tc.relu(params.fc1(squeezed))))
    if debug is not None:
        debug.setdefault("se_scale", []).append(excited.data)
    return x * excited


def _branch(x, params, mode, a_hat, neighbors, debug):
    if isinstance(params, MhsaParams):
        return mhsa(x, params, mode, debug)
    if isinstance(params, GcnParams):
        if mode == "spatial":
            return spatial_gcn(x, a_hat, params)
        adj = temporal_adjacency(x, TemporalAdjacencySpec(neighbors), debug)
        return temporal_gcn(x, adj, params)
    raise ConfigError(f"unsupported branch parameters {type(params).__name__}")


def mixformer_block(f, params, a_hat, debug=None):
    """Pre-norm block: parallel branches fused adaptively, then an MLP, both residual."""
    f = tc.as_tensor(f)
    expected = tuple(_BRANCH_KINDS.get(params.composition, ()))
    actual = tuple("attention" if isinstance(p, MhsaParams) else "gcn"
                   for p in (params.branch1, params.branch2))
    if expected != actual:
        raise ConfigError(f"block branches {actual} do not match composition "
                          f"{params.composition!r}")
    x = params.norm1(f)
    b1 = _branch(x, params.branch1, params.mode, a_hat, params.neighbors, debug)
    b2 = _branch(x, params.branch2, params.mode, a_hat, params.neighbors, debug)
    y = f + adaptive_fuse(b1, b2, params.fuse, debug)
    hidden = tc.gelu(params.mlp1(params.norm2(y)))
    return y + params.mlp2(hidden)


def mixformer_layer(f, params, a_hat, debug=None):
    """Two block streams in opposite spatial/temporal order, fused, SE, then FC."""
    order = STREAM_ORDERS.get(params.stream_order)
    if order is None:
        raise ConfigError(f"unknown stream order {params.stream_order!r}")
    streams = [params.stream_a] + ([params.stream_b] if len(order) == 2 else [])
    for modes, blocks in zip(order, streams):
        if tuple(b.mode for b in blocks) != modes:
            raise ConfigError(f"block modes {[b.mode for b in blocks]} do not match "
                              f"stream order {params.stream_order!r}")
    pos = params.se_position
    if len(params.se) != se_sites(params.stream_order, pos):
        raise ConfigError(f"SE position {pos!r} needs {se_sites(params.stream_order, pos)} "
                          f"SE modules, found {len(params.se)}")

    outs = []
    for s, blocks in enumerate(streams):
        h = mixformer_block(f, blocks[0], a_hat, debug)
        if pos == "between_blocks":
            h = se_layer(h, params.se[s], debug)
        h = mixformer_block(h, blocks[1], a_hat, debug)
        if pos == "before_fusion":
            h = se_layer(h, params.se[s], debug)
        outs.append(h)
    fused = adaptive_fuse(outs[0], outs[1], params.fuse, debug) if len(outs) == 2 else outs[0]
    if pos == "after_fusion":
        fused = se_layer(fused, params.se[0], debug)
    return params.fc(fused)


def block_param_count(dim, heads, composition, mlp_ratio):
    mhsa_n = 4 * dim * dim + dim
    gcn_n = 2 * dim * dim + 2 * dim
    branch = {"attention_gcn": mhsa_n + gcn_n,
              "double_attention": 2 * mhsa_n,
              "double_gcn": 2 * gcn_n}[composition]
    fuse = 2 * dim * 2 + 2
    mlp = 2 * mlp_ratio * dim * dim + mlp_ratio * dim + dim
    return branch + fuse + mlp + 4 * dim


def layer_param_count(dim, heads, stream_order, se_position, composition, mlp_ratio,
                      se_reduction):
    streams = len(STREAM_ORDERS[stream_order])
    hidden = dim // se_reduction
    se_n = 2 * dim * hidden + hidden + dim
    n = 2 * streams * block_param_count(dim, heads, composition, mlp_ratio)
    n += (2 * dim * 2 + 2) if streams == 2 else 0
    n += se_sites(stream_order, se_position) * se_n
    return n + dim * dim + dim

