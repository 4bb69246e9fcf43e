"""Model/run configuration and its canonical ``key = value`` text form."""

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError
from .mixformer import BRANCH_COMPOSITIONS, SE_POSITIONS, STREAM_ORDERS
from .tensor import ACTIVATIONS

EMBEDDING_MODES = ("spatial", "temporal", "both")
TOPOLOGIES = ("auto", "h36m", "chain")
REDUCTIONS = ("mean", "sum")


@dataclass
class ModelConfig:
    # shapes
    frames: int = 9
    joints: int = 17
    dim: int = 32
    motion_dim: int = 64
    layers: int = 2
    heads: int = 4
    neighbors: int = 3
    mlp_ratio: int = 4
    se_reduction: int = 4
    topology: str = "auto"
    # ablation toggles
    embedding_mode: str = "spatial"
    branch_composition: str = "attention_gcn"
    stream_order: str = "st_ts"
    se_position: str = "after_fusion"
    gcn_activation: str = "gelu"
    # input/output scaling (pixels in, millimetres out)
    normalize_input: bool = True
    image_width: float = 1000.0
    image_height: float = 1000.0
    output_scale: float = 1000.0
    # loss and optimiser
    delta_weight: float = 1.0
    loss_reduction: str = "mean"
    lr: float = 5e-4
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 4
    flip_augment: bool = False
    init_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        def choice(name, options):
            if getattr(self, name) not in options:
                raise ConfigError(f"{name} = {getattr(self, name)!r}; valid values: "
                                  f"{', '.join(options)}")

        choice("embedding_mode", EMBEDDING_MODES)
        choice("branch_composition", BRANCH_COMPOSITIONS)
        choice("stream_order", tuple(STREAM_ORDERS))
        choice("se_position", SE_POSITIONS)
        choice("gcn_activation", ACTIVATIONS)
        choice("topology", TOPOLOGIES)
        choice("loss_reduction", REDUCTIONS)
        for name in ("frames", "joints", "dim", "motion_dim", "layers", "heads",
                     "neighbors", "mlp_ratio", "se_reduction", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.dim % self.heads:
            raise ConfigError(f"heads = {self.heads} does not divide dim = {self.dim}")
        if self.dim % self.se_reduction:
            raise ConfigError(f"se_reduction = {self.se_reduction} does not divide dim = {self.dim}")
        if self.neighbors > self.frames:
            raise ConfigError(f"neighbors = {self.neighbors} exceeds frames = {self.frames}")
        if self.topology == "h36m" and self.joints != 17:
            raise ConfigError("the h36m topology has 17 joints")
        if self.delta_weight < 0:
            raise ConfigError("delta_weight must be non-negative")
        if self.init_std <= 0:
            raise ConfigError("init_std must be positive")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ConfigError("lr must be positive and weight_decay non-negative")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        lines = []
        for f in sorted(dataclasses.fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, base=None):
        return cls.from_mapping(parse_kv(text), base)

    @classmethod
    def from_mapping(cls, mapping, base=None):
        base = base or cls()
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        changes = {}
        for key, raw in mapping.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = coerce(raw, types[key], key)
        return dataclasses.replace(base, **changes)


def coerce(raw, kind, key):
    if not isinstance(raw, str):
        return raw
    try:
        if kind in (bool, "bool"):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {kind}") from None
    return raw


def parse_kv(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def format_kv(mapping):
    return "".join(f"{k} = {v}\n" for k, v in mapping.items())


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return ModelConfig.from_text(fh.read())
