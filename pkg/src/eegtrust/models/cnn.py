"""Small CNN baseline on EEG images.

conv3x3(16) -> GELU -> conv3x3(32) -> GELU -> maxpool 2x2 -> dense(2).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import nn
from ..nn import Parameter
from .vit import trunc_normal


@dataclass
class CNNConfig:
    grid: int = 9
    in_channels: int = 4
    conv1: int = 16
    conv2: int = 32
    n_classes: int = 2
    activation: str = "gelu"
    seed: int = 0

    @property
    def pooled(self):
        return self.grid // 2

    def to_dict(self):
        return asdict(self)


def init_cnn(cfg, dtype=np.float64):
    """He-scaled truncated-normal weights, zero biases."""
    rng = np.random.default_rng(cfg.seed)
    flat = cfg.pooled * cfg.pooled * cfg.conv2
    shapes = [
        ("conv1.W", (cfg.in_channels, 3, 3, cfg.conv1), 9 * cfg.in_channels),
        ("conv1.b", (cfg.conv1,), 0),
        ("conv2.W", (cfg.conv1, 3, 3, cfg.conv2), 9 * cfg.conv1),
        ("conv2.b", (cfg.conv2,), 0),
        ("fc.W", (flat, cfg.n_classes), flat),
        ("fc.b", (cfg.n_classes,), 0),
    ]
    params = {}
    for name, shape, fan_in in shapes:
        value = trunc_normal(rng, shape, np.sqrt(2.0 / fan_in)) if fan_in else np.zeros(shape)
        params[name] = Parameter(value.astype(dtype), name)
    return params


def cnn_forward(params, images, cfg):
    """Logits ``[B, n_classes]`` for images ``[B, grid, grid, in_channels]``."""
    act = nn.functional.ACTIVATIONS[cfg.activation]
    h = act(nn.conv2d_same(images, params["conv1.W"], params["conv1.b"]))
    h = act(nn.conv2d_same(h, params["conv2.W"], params["conv2.b"]))
    h = nn.max_pool2x2(h)
    h = h.reshape(h.shape[0], -1)
    return nn.linear(h, params["fc.W"], params["fc.b"])
