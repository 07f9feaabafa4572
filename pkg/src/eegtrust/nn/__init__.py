"""Minimal tensor autodiff: just enough for the ViT and the CNN baseline."""
from .tensor import Tensor, as_tensor, concat, no_grad, grad_enabled
from .functional import (
    AttentionConfig,
    conv2d_same,
    cross_entropy,
    gelu,
    layer_norm,
    linear,
    max_pool2x2,
    mlp_block,
    multi_head_attention,
    relu,
    softmax,
)
from .optim import Adam, Parameter, adam_step
from .gradcheck import grad_check, numeric_grad, relative_error
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam",
    "AttentionConfig",
    "Parameter",
    "Tensor",
    "adam_step",
    "as_tensor",
    "concat",
    "conv2d_same",
    "cross_entropy",
    "gelu",
    "grad_check",
    "grad_enabled",
    "layer_norm",
    "linear",
    "load_checkpoint",
    "max_pool2x2",
    "mlp_block",
    "multi_head_attention",
    "no_grad",
    "numeric_grad",
    "relative_error",
    "relu",
    "save_checkpoint",
    "softmax",
]
