"""Vision Transformer over EEG images (SP) or flat channel sequences (noSP).

Token pipeline: patches (or flat chunks) are linearly projected to ``D``
dimensions, a learnable class token is prepended, position embeddings are
added, and the sequence passes through pre-norm encoder blocks

    z' = MSA(LN(z)) + z
    z  = MLP(LN(z')) + z'

before a linear head reads the class-token row.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import nn
from ..errors import ConfigError, DataError, NumericalError
from ..nn import Parameter, Tensor


@dataclass
class ViTConfig:
    grid: int = 9
    patch_size: int = 3
    feature_dim: int = 4
    model_dim: int = 64
    n_heads: int = 4
    n_blocks: int = 6
    mlp_dim: int = 128
    n_classes: int = 2
    activation: str = "gelu"
    ln_eps: float = 1e-6
    spatial: bool = True
    # noSP tokenisation of the n_channels*d_f vector
    n_channels: int = 64
    nosp_tokens: int = 16
    init_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.spatial and self.grid % self.patch_size:
            raise ConfigError(f"patch size {self.patch_size} does not divide grid {self.grid}")
        if self.model_dim % self.n_heads:
            raise ConfigError(f"model_dim {self.model_dim} not divisible by n_heads {self.n_heads}")
        if not self.spatial and (self.n_channels * self.feature_dim) % self.nosp_tokens:
            raise ConfigError(f"{self.n_channels * self.feature_dim} features do not split into {self.nosp_tokens} tokens")
        if self.activation not in nn.functional.ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def n_tokens(self):
        if self.spatial:
            return (self.grid // self.patch_size) ** 2
        return self.nosp_tokens

    @property
    def token_dim(self):
        if self.spatial:
            return self.patch_size ** 2 * self.feature_dim
        return self.n_channels * self.feature_dim // self.nosp_tokens

    def to_dict(self):
        return asdict(self)


def patchify(image, p):
    """Split ``[..., m, m, d_f]`` images into ``[..., L, p*p*d_f]`` patches.

    Patches are ordered row-major over the grid; each is flattened row-major
    over its cells, bands fastest.
    """
    image = np.asarray(image)
    m, m2, d_f = image.shape[-3:]
    if m != m2:
        raise DataError(f"image must be square, got {image.shape}")
    if p <= 0 or m % p:
        raise ConfigError(f"patch size {p} does not divide grid size {m}")
    g = m // p
    lead = image.shape[:-3]
    x = image.reshape(*lead, g, p, g, p, d_f)
    k = len(lead)
    x = np.moveaxis(x, k + 2, k + 1)  # [..., g, g, p, p, d_f]
    return x.reshape(*lead, g * g, p * p * d_f)


def unpatchify(patches, p, d_f):
    patches = np.asarray(patches)
    L = patches.shape[-2]
    g = int(round(math.sqrt(L)))
    lead = patches.shape[:-2]
    x = patches.reshape(*lead, g, g, p, p, d_f)
    k = len(lead)
    x = np.moveaxis(x, k + 1, k + 2)
    return x.reshape(*lead, g * p, g * p, d_f)


def tokenize_flat(flat, n_tokens):
    flat = np.asarray(flat)
    return flat.reshape(*flat.shape[:-1], n_tokens, flat.shape[-1] // n_tokens)


def trunc_normal(rng, shape, std):
    """Normal(0, std) samples redrawn until they fall within two std."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while np.any(bad):
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


def init_params(cfg, dtype=np.float64):
    """Fresh parameters: truncated-normal weights/embeddings, zero biases, unit LN gains."""
    rng = np.random.default_rng(cfg.seed)
    D, F, L = cfg.model_dim, cfg.mlp_dim, cfg.n_tokens
    shapes = [
        ("patch_proj", (cfg.token_dim, D), "w"),
        ("cls_token", (D,), "w"),
        ("pos_embed", (L + 1, D), "w"),
    ]
    for i in range(cfg.n_blocks):
        pre = f"blocks.{i}."
        shapes += [
            (pre + "ln1.gain", (D,), "one"),
            (pre + "ln1.bias", (D,), "zero"),
            (pre + "attn.W_q", (D, D), "w"),
            (pre + "attn.W_k", (D, D), "w"),
            (pre + "attn.W_v", (D, D), "w"),
            (pre + "attn.W_o", (D, D), "w"),
            (pre + "ln2.gain", (D,), "one"),
            (pre + "ln2.bias", (D,), "zero"),
            (pre + "mlp.W1", (D, F), "w"),
            (pre + "mlp.b1", (F,), "zero"),
            (pre + "mlp.W2", (F, D), "w"),
            (pre + "mlp.b2", (D,), "zero"),
        ]
    shapes += [("head.W", (D, cfg.n_classes), "w"), ("head.b", (cfg.n_classes,), "zero")]
    params = {}
    for name, shape, kind in shapes:
        if kind == "w":
            value = trunc_normal(rng, shape, cfg.init_std)
        elif kind == "one":
            value = np.ones(shape)
        else:
            value = np.zeros(shape)
        params[name] = Parameter(value.astype(dtype), name)
    return params


def embed(params, tokens):
    """Patch embedding: class token prepended, position embeddings added -> ``[B, L+1, D]``."""
    tokens = nn.as_tensor(tokens)
    B = tokens.shape[0]
    proj = nn.linear(tokens, params["patch_proj"])
    D = proj.shape[-1]
    cls = params["cls_token"].reshape(1, 1, D)
    cls = cls + Tensor(np.zeros((B, 1, D), dtype=proj.dtype))
    return nn.concat([cls, proj], axis=1) + params["pos_embed"]


def encoder_block(params, i, z, cfg):
    pre = f"blocks.{i}."
    attn_cfg = nn.AttentionConfig(cfg.model_dim, cfg.n_heads)
    h = nn.layer_norm(z, params[pre + "ln1.gain"], params[pre + "ln1.bias"], cfg.ln_eps)
    z = z + nn.multi_head_attention(
        h, attn_cfg, params[pre + "attn.W_q"], params[pre + "attn.W_k"],
        params[pre + "attn.W_v"], params[pre + "attn.W_o"],
    )
    h = nn.layer_norm(z, params[pre + "ln2.gain"], params[pre + "ln2.bias"], cfg.ln_eps)
    return z + nn.mlp_block(
        h, params[pre + "mlp.W1"], params[pre + "mlp.b1"],
        params[pre + "mlp.W2"], params[pre + "mlp.b2"], cfg.activation,
    )


def encode(params, tokens, cfg):
    """Run embedding and all encoder blocks; returns ``[B, L+1, D]``."""
    z = embed(params, tokens)
    for i in range(cfg.n_blocks):
        z = encoder_block(params, i, z, cfg)
        if not np.all(np.isfinite(z.data)):
            raise NumericalError(f"non-finite activation in encoder block {i}")
    return z


def forward_tokens(params, tokens, cfg):
    """Logits ``[B, n_classes]`` for a batch of token sequences ``[B, L, token_dim]``."""
    z = encode(params, tokens, cfg)
    return nn.linear(z[:, 0, :], params["head.W"], params["head.b"])


def vit_forward(params, image, cfg):
    """Logits for one EEG image ``[9, 9, d_f]`` (or a batch ``[B, 9, 9, d_f]``)."""
    image = np.asarray(image, dtype=params["patch_proj"].dtype)
    single = image.ndim == 3
    tokens = patchify(image[None] if single else image, cfg.patch_size)
    logits = forward_tokens(params, tokens, cfg)
    return logits.reshape(cfg.n_classes) if single else logits


def vit_nosp_forward(params, flat_features, cfg):
    """Logits for a flat channel-major feature vector (or a batch of them)."""
    flat = np.asarray(flat_features, dtype=params["patch_proj"].dtype)
    expected = cfg.n_channels * cfg.feature_dim
    if flat.shape[-1] != expected:
        raise DataError(f"flat feature length {flat.shape[-1]} != {expected}")
    single = flat.ndim == 1
    tokens = tokenize_flat(flat[None] if single else flat, cfg.nosp_tokens)
    logits = forward_tokens(params, tokens, cfg)
    return logits.reshape(cfg.n_classes) if single else logits


@dataclass
class TrainHyper:
    batch_size: int = 128
    lr: float = 1e-4
    max_epochs: int = 500
    early_stop_loss: float = 1e-4
    seed: int = 0
    dtype: str = "float64"

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainLog:
    initial_loss: float = float("nan")
    epoch_loss: list = field(default_factory=list)
    epoch_accuracy: list = field(default_factory=list)
    stopped_early: bool = False

    @property
    def epochs(self):
        return len(self.epoch_loss)


def train_tokens(forward, params, tokens, labels, hyper, log_initial=True):
    """Generic mini-batch Adam loop shared by the ViT and the CNN.

    ``forward(params, batch_inputs) -> logits Tensor``.
    """
    labels = np.asarray(labels).astype(np.int64)
    if len(tokens) == 0:
        raise DataError("empty training set")
    if len(np.unique(labels)) < 2:
        raise DataError("training set contains a single class")
    dtype = np.dtype(hyper.dtype)
    tokens = np.asarray(tokens, dtype=dtype)
    plist = list(params.values())
    opt = nn.Adam(plist, lr=hyper.lr)
    rng = np.random.default_rng(hyper.seed)
    log = TrainLog()
    if log_initial:
        with nn.no_grad():
            log.initial_loss = float(nn.cross_entropy(forward(params, tokens), labels).data)
    n = len(tokens)
    for _ in range(hyper.max_epochs):
        order = rng.permutation(n)
        total_loss, correct = 0.0, 0
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            opt.zero_grad()
            logits = forward(params, tokens[idx])
            loss = nn.cross_entropy(logits, labels[idx])
            lv = float(loss.data)
            if not math.isfinite(lv):
                raise NumericalError("non-finite training loss")
            loss.backward()
            opt.step()
            total_loss += lv * len(idx)
            correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())
        log.epoch_loss.append(total_loss / n)
        log.epoch_accuracy.append(correct / n)
        if log.epoch_loss[-1] < hyper.early_stop_loss:
            log.stopped_early = True
            break
    return log


def vit_train(inputs, labels, cfg, hyper=None):
    """Train from scratch on SP images ``[N, 9, 9, d_f]`` or noSP vectors ``[N, C*d_f]``."""
    hyper = hyper or TrainHyper()
    params = init_params(cfg, dtype=np.dtype(hyper.dtype))
    inputs = np.asarray(inputs)
    tokens = patchify(inputs, cfg.patch_size) if cfg.spatial else tokenize_flat(inputs, cfg.nosp_tokens)
    log = train_tokens(lambda p, t: forward_tokens(p, t, cfg), params, tokens, labels, hyper)
    return params, log
