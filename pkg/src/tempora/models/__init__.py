"""Link-prediction model zoo: graph-attention (TGAT-style) and
sequence-transformer (DyGFormer-style) architectures with swappable time
encoders."""

from .common import LinkPredictor, LinkModel, count_parameters
from .config import ModelConfig, build_model
from .tgat import TGAT
from .dygformer import DyGFormer, DyGFormerSeparate, DyGDecoder

__all__ = [
    "ModelConfig",
    "build_model",
    "LinkPredictor",
    "LinkModel",
    "count_parameters",
    "TGAT",
    "DyGFormer",
    "DyGFormerSeparate",
    "DyGDecoder",
]
