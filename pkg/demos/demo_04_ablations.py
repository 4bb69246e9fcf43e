"""
Ablation toggles and model size
===============================

Four configuration axes cover the reference ablations: what the two branches
of a block are, the block order in each stream, which position embeddings
are added, and where the SE layer sits. The named presets expand to 15 rows.
"""

from mixtgformer.ablation import AXES, parse_grid
from mixtgformer.config import ModelConfig
from mixtgformer.model import closed_form_param_count, reference_shape_config

for axis, values in AXES.items():
    print(f"{axis:20s} {', '.join(values)}")

print()
for name, overrides in parse_grid("all"):
    config = ModelConfig().replace(**overrides)
    print(f"{name:75s} {closed_form_param_count(config):>9,}")

###############################################################################
# At the large reference shape the width is not given; the closest
# multiple of the head count to the reported size is d = 128.
big = reference_shape_config()
print(f"\nN={big.layers} T={big.frames} d={big.dim} d'={big.motion_dim}: "
      f"{closed_form_param_count(big):,} parameters")
