"""Dual-stream spatio-temporal GCN-Transformer for 2D-to-3D pose lifting."""

__version__ = "0.1.0"

from .config import ModelConfig, load_config
from .model import forward, init_params, predict
from .skeleton import PoseSequence, human36m_topology, synth_sequence
from .training import evaluate_params, train_loop

__all__ = ["ModelConfig", "load_config", "init_params", "forward", "predict", "PoseSequence",
           "human36m_topology", "synth_sequence", "train_loop", "evaluate_params"]
