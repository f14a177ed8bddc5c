"""Deterministic from-scratch neural-network engine (64-bit floats)."""

from .layers import (
    Conv1dSpec,
    DenseSpec,
    DropoutSpec,
    LeakyReluSpec,
    LstmSpec,
    spec_from_dict,
)
from .loss import loss_nmse
from .network import Network
from .optim import AdamState, adam_step
from .checkpoint import load_checkpoint, save_checkpoint, sidecar_path
from .verify import grad_check

__all__ = [
    "Conv1dSpec",
    "DenseSpec",
    "DropoutSpec",
    "LeakyReluSpec",
    "LstmSpec",
    "spec_from_dict",
    "loss_nmse",
    "Network",
    "AdamState",
    "adam_step",
    "load_checkpoint",
    "save_checkpoint",
    "sidecar_path",
    "grad_check",
]
