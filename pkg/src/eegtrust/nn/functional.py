"""Differentiable building blocks for the transformer and the CNN baseline.

Each op computes its forward pass in numpy and returns a :class:`Tensor` whose
backward closure is written out by hand (fused), which keeps the graph small.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .tensor import Tensor, as_tensor

_GELU_C = math.sqrt(2.0 / math.pi)


def linear(x, W, b=None):
    """``x @ W + b`` over the last axis of ``x`` (any number of leading axes)."""
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"linear: input dim {x.shape[-1]} != weight rows {W.shape[0]}")
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise ValueError(f"linear: bias shape {b.shape} != ({W.shape[1]},)")
    xd, Wd = x.data, W.data
    out = xd @ Wd
    if b is not None:
        out = out + b.data
    lead = xd.shape[:-1]

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = (g2 @ Wd.T).reshape(*lead, Wd.shape[0])
        gW = xd.reshape(-1, xd.shape[-1]).T @ g2
        if b is None:
            return gx, gW
        return gx, gW, g2.sum(axis=0)

    parents = (x, W) if b is None else (x, W, b)
    return Tensor._make(out, parents, backward)


def layer_norm(x, gain, bias, eps=1e-9):
    """Normalise each row over the last axis, then apply ``gain``/``bias``.

    ``eps`` is added to the variance; it only matters for (near-)constant rows.
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    xd = x.data
    n = xd.shape[-1]
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        gxhat = g * gain.data
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        g2 = g.reshape(-1, n)
        ggain = (g2 * xhat.reshape(-1, n)).sum(axis=0)
        return gx, ggain, g2.sum(axis=0)

    return Tensor._make(out, (x, gain, bias), backward)


def softmax(x, axis=-1):
    """Numerically stable softmax (max-shifted)."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._make(y, (x,), backward)


def gelu(x):
    """GELU, tanh approximation: ``0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))``."""
    x = as_tensor(x)
    xd = x.data
    c = xd.dtype.type(_GELU_C)
    a = xd.dtype.type(0.044715)
    inner = c * (xd + a * xd * xd * xd)
    t = np.tanh(inner)
    half = xd.dtype.type(0.5)

    def backward(g):
        d = xd * xd
        d *= 3 * a
        d += 1
        d *= c
        s = t * t
        np.subtract(1, s, out=s)
        s *= xd
        s *= d
        s += 1
        s += t
        s *= half
        s *= g
        return (s,)

    return Tensor._make(half * xd * (1 + t), (x,), backward)


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor._make(x.data * mask, (x,), lambda g: (g * mask,))


def identity(x):
    return as_tensor(x)


ACTIVATIONS = {"gelu": gelu, "relu": relu, "identity": identity}


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int
    n_heads: int

    def __post_init__(self):
        if self.model_dim <= 0 or self.n_heads <= 0:
            raise ValueError("model_dim and n_heads must be positive")
        if self.model_dim % self.n_heads:
            raise ValueError(f"model_dim {self.model_dim} not divisible by n_heads {self.n_heads}")

    @property
    def head_dim(self):
        return self.model_dim // self.n_heads


def multi_head_attention(z, cfg, W_q, W_k, W_v, W_o, return_weights=False):
    """Scaled dot-product self-attention over the token axis.

    ``z`` is ``[tokens, D]`` or ``[batch, tokens, D]``.  With
    ``return_weights`` the per-head attention matrices
    ``[..., heads, tokens, tokens]`` are returned alongside the output.
    """
    z = as_tensor(z)
    if z.shape[-1] != cfg.model_dim:
        raise ValueError(f"attention: token dim {z.shape[-1]} != model_dim {cfg.model_dim}")
    for W in (W_q, W_k, W_v, W_o):
        if tuple(W.shape) != (cfg.model_dim, cfg.model_dim):
            raise ValueError(f"attention: weight shape {W.shape} != ({cfg.model_dim}, {cfg.model_dim})")
    squeeze = z.ndim == 2
    if squeeze:
        z = z.reshape(1, *z.shape)
    B, N, D = z.shape
    H, dh = cfg.n_heads, cfg.head_dim

    def heads(t):
        return t.reshape(B, N, H, dh).transpose(0, 2, 1, 3)

    q = heads(linear(z, W_q))
    k = heads(linear(z, W_k))
    v = heads(linear(z, W_v))
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(dh))
    attn = softmax(scores, axis=-1)
    ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(B, N, D)
    out = linear(ctx, W_o)
    if squeeze:
        out = out.reshape(N, D)
    if return_weights:
        w = attn.data[0] if squeeze else attn.data
        return out, w
    return out


def mlp_block(z, W1, b1, W2, b2, activation="gelu"):
    act = ACTIVATIONS[activation] if isinstance(activation, str) else activation
    return linear(act(linear(z, W1, b1)), W2, b2)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError("cross_entropy expects logits of shape [batch, classes]")
    B, K = logits.shape
    if labels.shape != (B,):
        raise ValueError(f"labels shape {labels.shape} != ({B},)")
    if labels.size and (labels.min() < 0 or labels.max() >= K or not np.all(labels == np.round(labels))):
        raise DataError(f"labels must be integers in [0, {K - 1}]")
    labels = labels.astype(np.int64)
    x = logits.data
    shifted = x - x.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsumexp
    rows = np.arange(B)
    loss = -logp[rows, labels].mean()

    def backward(g):
        p = np.exp(logp)
        p[rows, labels] -= 1.0
        return (p * (g / B),)

    return Tensor._make(np.asarray(loss, dtype=x.dtype), (logits,), backward)


def conv2d_same(x, W, b=None):
    """3x3 (or any odd k) convolution with zero 'same' padding, channels-last.

    ``x``: ``[B, H, W, C]``; ``W``: ``[C, k, k, F]``; returns ``[B, H, W, F]``.
    """
    x, W = as_tensor(x), as_tensor(W)
    Bn, Hh, Ww, C = x.shape
    Cw, k, k2, F = W.shape
    if Cw != C or k != k2 or k % 2 == 0:
        raise ValueError(f"conv2d: incompatible input {x.shape} and kernel {W.shape}")
    pad = k // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    # [B, H, W, C, k, k]
    cols = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    cols = cols.reshape(Bn * Hh * Ww, C * k * k)
    W2 = W.data.reshape(C * k * k, F)
    out = (cols @ W2).reshape(Bn, Hh, Ww, F)
    if b is not None:
        b = as_tensor(b)
        out = out + b.data

    def backward(g):
        g2 = g.reshape(-1, F)
        gW = (cols.T @ g2).reshape(W.shape)
        gcols = (g2 @ W2.T).reshape(Bn, Hh, Ww, C, k, k)
        gxp = np.zeros(xp.shape, dtype=xp.dtype)
        for i in range(k):
            for j in range(k):
                gxp[:, i:i + Hh, j:j + Ww, :] += gcols[..., i, j]
        gx = gxp[:, pad:pad + Hh, pad:pad + Ww, :]
        if b is None:
            return gx, gW
        return gx, gW, g2.sum(axis=0)

    parents = (x, W) if b is None else (x, W, b)
    return Tensor._make(out, parents, backward)


def max_pool2x2(x):
    """2x2 max pooling with stride 2 (channels-last); odd trailing rows/cols dropped."""
    x = as_tensor(x)
    Bn, Hh, Ww, C = x.shape
    H2, W2 = Hh // 2, Ww // 2
    xc = x.data[:, :2 * H2, :2 * W2, :]
    blocks = xc.reshape(Bn, H2, 2, W2, 2, C).transpose(0, 1, 3, 5, 2, 4).reshape(Bn, H2, W2, C, 4)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        gb = np.zeros(blocks.shape, dtype=g.dtype)
        np.put_along_axis(gb, idx[..., None], g[..., None], axis=-1)
        gb = gb.reshape(Bn, H2, W2, C, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(Bn, 2 * H2, 2 * W2, C)
        gx = np.zeros(x.shape, dtype=g.dtype)
        gx[:, :2 * H2, :2 * W2, :] = gb
        return (gx,)

    return Tensor._make(out, (x,), backward)
