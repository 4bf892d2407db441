"""Desk-scale segmentation kit: differential aggregated attention encoder
blocks, causal-resonance multi-scale skip connections over a selective
state-space scan, and a U-shaped network with training, evaluation, and
profiling tooling, all on a minimal reverse-mode autodiff tensor core."""

from .attention import AttnConfig, DiffAggAttention, diff_softmax
from .crmsm import CrMsm, CrMsmConfig, CrMsmScale, make_views
from .model import ModelConfig, SamaUNet, seg_loss
from .sama import AblationFlags, SamaBlock, SamaConfig
from .ssm import SelectiveSsm
from .tensor import Tensor

__all__ = [
    "AblationFlags", "AttnConfig", "CrMsm", "CrMsmConfig", "CrMsmScale",
    "DiffAggAttention", "ModelConfig", "SamaBlock", "SamaConfig", "SamaUNet",
    "SelectiveSsm", "Tensor", "diff_softmax", "make_views", "seg_loss",
]
