"""Ablation grids: named presets for the four reference ablation tables, or
explicit ``key=v1,v2;key2=...`` products over the toggle axes."""

import itertools

from .config import EMBEDDING_MODES
from .errors import ConfigError
from .mixformer import BRANCH_COMPOSITIONS, SE_POSITIONS, STREAM_ORDERS

AXES = {
    "branch_composition": BRANCH_COMPOSITIONS,
    "stream_order": tuple(STREAM_ORDERS),
    "se_position": SE_POSITIONS,
    "embedding_mode": EMBEDDING_MODES,
}

PRESETS = {
    # module composition, under spatial->temporal order in both streams
    "table4": [{"branch_composition": c, "stream_order": "st_st", "se_position": "none"}
               for c in ("double_attention", "double_gcn", "attention_gcn")],
    "table5": [{"stream_order": o, "se_position": "none"}
               for o in ("ss_ss", "tt_tt", "st_st", "ts_ts", "st_ts")],
    "table6": [{"embedding_mode": m, "se_position": "none"}
               for m in ("temporal", "spatial", "both")],
    "table7": [{"se_position": p} for p in SE_POSITIONS],
}


def variant_name(overrides):
    return ",".join(f"{k}={v}" for k, v in overrides.items()) or "base"


def parse_grid(spec):
    """Return a list of (row_name, overrides) for a grid spec.

    ``spec`` is a comma-separated list of preset names (``all`` for every
    preset, ``full`` for the product of every axis), or ``axis=v1,v2;axis=v3``
    for a product over toggle values.
    """
    spec = spec.strip()
    if spec == "full":
        spec = ";".join(f"{k}={','.join(v)}" for k, v in AXES.items())
    if "=" not in spec:
        names = list(PRESETS) if spec == "all" else [s.strip() for s in spec.split(",") if s.strip()]
        rows = []
        for name in names:
            if name not in PRESETS:
                raise ConfigError(f"unknown preset {name!r}; valid presets: "
                                  f"{', '.join(PRESETS)}, all")
            rows += [(f"{name}/{variant_name(o)}", dict(o)) for o in PRESETS[name]]
        return rows
    axes = []
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, _, values = part.partition("=")
        key = key.strip()
        if key not in AXES:
            raise ConfigError(f"unknown ablation axis {key!r}; valid axes: {', '.join(AXES)}")
        vals = [v.strip() for v in values.split(",") if v.strip()]
        for v in vals:
            if v not in AXES[key]:
                raise ConfigError(f"invalid {key} value {v!r}; valid values: "
                                  f"{', '.join(AXES[key])}")
        if not vals:
            raise ConfigError(f"no values given for {key}")
        axes.append([(key, v) for v in vals])
    rows = []
    for combo in itertools.product(*axes):
        overrides = dict(combo)
        rows.append((variant_name(overrides), overrides))
    return rows
