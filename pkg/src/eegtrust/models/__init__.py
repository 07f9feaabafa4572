"""The trust ViT (SP / noSP), the CNN and the classical baselines behind one interface."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .. import nn
from ..errors import ConfigError
from ..spatial import CHANNEL_NAMES, flatten_nosp, to_image
from .base import Classifier, Standardizer
from .baselines import KNN, GaussianNB, LinearSVM
from .cnn import CNNConfig, cnn_forward, init_cnn
from .vit import (
    TrainHyper,
    TrainLog,
    ViTConfig,
    forward_tokens,
    init_params,
    patchify,
    tokenize_flat,
    train_tokens,
    unpatchify,
    vit_forward,
    vit_nosp_forward,
    vit_train,
)

MODEL_IDS = ("vit", "vit-nosp", "nb", "knn", "svm", "cnn")


class _NeuralClassifier(Classifier):
    """Shared fit/score for the gradient-trained models; score is ``logit1 - logit0``."""

    predict_batch = 1024

    def __init__(self, hyper=None, channel_names=CHANNEL_NAMES):
        super().__init__()
        self.hyper = hyper or TrainHyper()
        self.channel_names = tuple(channel_names)
        self.log = None

    def _inputs(self, Xs):
        raise NotImplementedError

    def _init(self, dtype):
        raise NotImplementedError

    def _forward(self, params, inputs):
        raise NotImplementedError

    def _fit(self, Xs, y):
        dtype = np.dtype(self.hyper.dtype)
        self.params = self._init(dtype)
        self.log = train_tokens(self._forward, self.params, self._inputs(Xs).astype(dtype), y, self.hyper)

    def _score(self, Xs):
        inputs = self._inputs(Xs).astype(np.dtype(self.hyper.dtype))
        out = []
        with nn.no_grad():
            for start in range(0, len(inputs), self.predict_batch):
                logits = self._forward(self.params, inputs[start:start + self.predict_batch]).data
                out.append(logits[:, 1] - logits[:, 0])
        return np.concatenate(out) if out else np.zeros(0)

    def _state(self):
        return {k: p.data for k, p in self.params.items()}


class ViTClassifier(_NeuralClassifier):
    def __init__(self, cfg=None, hyper=None, channel_names=CHANNEL_NAMES):
        super().__init__(hyper, channel_names)
        self.cfg = cfg or ViTConfig()
        self.model_id = "vit" if self.cfg.spatial else "vit-nosp"

    def _inputs(self, Xs):
        if self.cfg.spatial:
            return patchify(to_image(Xs, self.channel_names), self.cfg.patch_size)
        return tokenize_flat(flatten_nosp(Xs), self.cfg.nosp_tokens)

    def _init(self, dtype):
        return init_params(self.cfg, dtype)

    def _forward(self, params, tokens):
        return forward_tokens(params, tokens, self.cfg)


class CNNClassifier(_NeuralClassifier):
    model_id = "cnn"

    def __init__(self, cfg=None, hyper=None, channel_names=CHANNEL_NAMES):
        super().__init__(hyper, channel_names)
        self.cfg = cfg or CNNConfig()

    def _inputs(self, Xs):
        return to_image(Xs, self.channel_names)

    def _init(self, dtype):
        return init_cnn(self.cfg, dtype)

    def _forward(self, params, images):
        return cnn_forward(params, images, self.cfg)


def make_model(model_id, vit_cfg=None, hyper=None, knn_k=5, svm_lambda=1e-4, seed=0,
               channel_names=CHANNEL_NAMES):
    """Fresh, unfitted classifier for ``model_id``; ``seed`` sets network initialisation."""
    if model_id in ("vit", "vit-nosp"):
        cfg = replace(vit_cfg or ViTConfig(), spatial=(model_id == "vit"), seed=seed)
        return ViTClassifier(cfg, hyper, channel_names)
    if model_id == "cnn":
        return CNNClassifier(CNNConfig(seed=seed), hyper, channel_names)
    if model_id == "nb":
        return GaussianNB()
    if model_id == "knn":
        return KNN(knn_k)
    if model_id == "svm":
        return LinearSVM(svm_lambda)
    raise ConfigError(f"unknown model {model_id!r}; choose from {', '.join(MODEL_IDS)}")


__all__ = [
    "CNNClassifier",
    "CNNConfig",
    "Classifier",
    "GaussianNB",
    "KNN",
    "LinearSVM",
    "MODEL_IDS",
    "Standardizer",
    "TrainHyper",
    "TrainLog",
    "ViTClassifier",
    "ViTConfig",
    "cnn_forward",
    "init_cnn",
    "init_params",
    "make_model",
    "patchify",
    "unpatchify",
    "vit_forward",
    "vit_nosp_forward",
    "vit_train",
]
