"""Depth-quality-gated RGB-D salient object detection on the CPU."""
from .model import DFMNet, InferenceOutput, LossValue, ModelConfig, build_manifest, forward, loss, param_stats
from .weights import ModelWeights, init_random, load_file, save_file

__version__ = "0.1.0"
