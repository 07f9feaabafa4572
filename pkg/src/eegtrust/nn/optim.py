from __future__ import annotations

import numpy as np

from ..errors import NumericalError
from .tensor import Tensor


class Parameter(Tensor):
    """A trainable tensor carrying its name and Adam moment buffers."""

    __slots__ = ("m", "v", "step")

    def __init__(self, data, name):
        super().__init__(np.array(data, copy=True), requires_grad=True, name=name)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def adam_step(params, grads, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update applied in place to ``params``."""
    for p, g in zip(params, grads):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter {p.name!r} shape {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {p.name!r}")
        p.step += 1
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * (g * g)
        m_hat = p.m / (1.0 - beta1 ** p.step)
        v_hat = p.v / (1.0 - beta2 ** p.step)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.lr, self.beta1, self.beta2, self.eps)
