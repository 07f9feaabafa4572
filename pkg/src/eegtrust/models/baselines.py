"""Classical baselines on the flattened, standardised DE vector."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .base import Classifier


class GaussianNB(Classifier):
    """Gaussian class-conditionals per feature, scored in log space.

    Score is the log-posterior margin ``log P(1|x) - log P(0|x)``.
    """

    model_id = "nb"

    def __init__(self, var_floor=1e-9):
        super().__init__()
        self.var_floor = var_floor

    def _fit(self, Xs, y):
        X = Xs.reshape(len(Xs), -1)
        self.means_ = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
        self.vars_ = np.stack([np.maximum(X[y == c].var(axis=0), self.var_floor) for c in (0, 1)])
        self.log_prior_ = np.log(np.array([np.mean(y == 0), np.mean(y == 1)]))

    def joint_log_likelihood(self, X):
        X = X.reshape(len(X), -1)
        out = []
        for c in (0, 1):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.vars_[c]) + (X - self.means_[c]) ** 2 / self.vars_[c], axis=1)
            out.append(ll + self.log_prior_[c])
        return np.stack(out, axis=1)

    def _score(self, Xs):
        jll = self.joint_log_likelihood(Xs)
        return jll[:, 1] - jll[:, 0]

    def _state(self):
        return {"means": self.means_, "vars": self.vars_, "log_prior": self.log_prior_}


class KNN(Classifier):
    """Euclidean k-nearest neighbours; score is the fraction of label-1 neighbours.

    Distance ties keep training order; a split vote (score exactly 0.5) goes
    to label 0.
    """

    model_id = "knn"
    threshold = 0.5

    def __init__(self, k=5):
        super().__init__()
        if k < 1:
            raise ConfigError("k must be >= 1")
        self.k = k

    def _fit(self, Xs, y):
        self.X_ = Xs.reshape(len(Xs), -1)
        self.y_ = y
        self._sq = np.einsum("ij,ij->i", self.X_, self.X_)

    def _score(self, Xs):
        Q = Xs.reshape(len(Xs), -1)
        k = min(self.k, len(self.X_))
        out = np.empty(len(Q))
        for start in range(0, len(Q), 512):
            q = Q[start:start + 512]
            d2 = np.einsum("ij,ij->i", q, q)[:, None] - 2.0 * q @ self.X_.T + self._sq[None, :]
            nn_idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start:start + len(q)] = self.y_[nn_idx].mean(axis=1)
        return out

    def _state(self):
        return {"train_X": self.X_, "train_y": self.y_.astype(np.float64), "k": np.array([self.k], dtype=np.float64)}


class LinearSVM(Classifier):
    """Linear SVM: mean hinge loss plus ``lam/2 * |w|^2``, full-batch subgradient descent.

    The iterate with the lowest objective is kept.  Score is ``w.x + b``.
    """

    model_id = "svm"

    def __init__(self, lam=1e-4, n_iter=1000, lr=0.1):
        super().__init__()
        self.lam, self.n_iter, self.lr = lam, n_iter, lr

    def objective(self, X, t, w, b):
        margins = t * (X @ w + b)
        return np.maximum(0.0, 1.0 - margins).mean() + 0.5 * self.lam * (w @ w)

    def _fit(self, Xs, y):
        X = Xs.reshape(len(Xs), -1)
        t = 2.0 * y - 1.0
        n, d = X.shape
        w, b = np.zeros(d), 0.0
        best = (self.objective(X, t, w, b), w.copy(), b)
        for it in range(self.n_iter):
            margins = t * (X @ w + b)
            active = margins < 1.0
            gw = -(t[active, None] * X[active]).sum(axis=0) / n + self.lam * w
            gb = -t[active].sum() / n
            step = self.lr / np.sqrt(1.0 + it)
            w = w - step * gw
            b = b - step * gb
            obj = self.objective(X, t, w, b)
            if obj < best[0]:
                best = (obj, w.copy(), b)
        self.objective_, self.w_, self.b_ = best

    def _score(self, Xs):
        return Xs.reshape(len(Xs), -1) @ self.w_ + self.b_

    def _state(self):
        return {"w": self.w_, "b": np.array([self.b_])}
