from __future__ import annotations

import numpy as np

from ..errors import DataError, NotFittedError


class Standardizer:
    """Per-feature z-scoring with statistics from the training split only."""

    def __init__(self, min_std=1e-12):
        self.min_std = min_std
        self.mean_ = None
        self.std_ = None

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.std_ = np.where(std > self.min_std, std, 1.0)
        return self

    def transform(self, X):
        if self.mean_ is None:
            raise NotFittedError("standardizer used before fit")
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.std_

    def fit_transform(self, X):
        return self.fit(X).transform(X)


class Classifier:
    """Common surface: ``fit``, ``decision_function``, ``predict``.

    Inputs are raw DE features ``[N, n_channels, n_bands]``; each model
    standardises internally.  ``predict`` is ``decision_function > threshold``.
    """

    model_id = "base"
    threshold = 0.0

    def __init__(self):
        self.scaler = Standardizer()
        self.fitted = False

    def _check_fit_inputs(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 3:
            raise DataError(f"expected features [N, channels, bands], got shape {X.shape}")
        if len(X) != len(y):
            raise DataError(f"{len(X)} samples but {len(y)} labels")
        if len(np.unique(y)) < 2:
            raise DataError("training set contains a single class")
        if not np.all(np.isin(y, (0, 1))):
            raise DataError("labels must be 0 or 1")
        return X, y.astype(np.int64)

    def _scaled(self, X):
        """Standardised features in the original ``[N, C, B]`` shape."""
        X = np.asarray(X, dtype=np.float64)
        flat = X.reshape(len(X), -1)
        return self.scaler.transform(flat).reshape(X.shape)

    def fit(self, X, y):
        X, y = self._check_fit_inputs(X, y)
        self.scaler.fit(X.reshape(len(X), -1))
        self._fit(self._scaled(X), y)
        self.fitted = True
        return self

    def decision_function(self, X):
        if not self.fitted:
            raise NotFittedError(f"{self.model_id}: predict called before fit")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3:
            raise DataError(f"expected features [N, channels, bands], got shape {X.shape}")
        return np.asarray(self._score(self._scaled(X)), dtype=np.float64)

    def predict_with_score(self, X):
        s = self.decision_function(X)
        return (s > self.threshold).astype(np.int64), s

    def predict(self, X):
        return self.predict_with_score(X)[0]

    def state_dict(self):
        state = {"scaler.mean": self.scaler.mean_, "scaler.std": self.scaler.std_}
        state.update(self._state())
        return state

    # subclasses implement these
    def _fit(self, Xs, y):
        raise NotImplementedError

    def _score(self, Xs):
        raise NotImplementedError

    def _state(self):
        return {}
