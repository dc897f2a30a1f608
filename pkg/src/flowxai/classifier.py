"""sklearn-style estimator facade over the transformer and training loop."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import model as _model
from . import training as _training
from .autodiff import Tensor


def _softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class FlowTransformerClassifier(BaseEstimator, ClassifierMixin):
    """Transformer classifier with focal loss, decoupled weight decay and
    early stopping on validation macro-F1.

    Defaults are desk scale (d_model=32, 2 layers, 4 heads); the full
    configuration is reachable through the same parameters. `fit` expects
    standardized inputs and keeps the best-epoch weights.
    """

    def __init__(self, d_model: int = 32, n_layers: int = 2, n_heads: int = 4,
                 n_classes: int = 9, learning_rate: float = 1e-4,
                 weight_decay: float = 1e-2, batch_size: int = 256,
                 max_epochs: int = 30, patience: int = 5,
                 class_weights=None, seed: int = 0):
        self.d_model = d_model
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.n_classes = n_classes
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.class_weights = class_weights
        self.seed = seed

    # -- construction -----------------------------------------------------

    def _model_config(self, n_features: int) -> _model.ModelConfig:
        return _model.ModelConfig(
            d_model=self.d_model, n_layers=self.n_layers, n_heads=self.n_heads,
            n_features=n_features, n_classes=self.n_classes)

    def init_params(self, n_features: int):
        """Seeded random initialization without training (useful for
        gradient checks against an untrained network)."""
        self.config_ = self._model_config(n_features)
        self.params_ = _model.init_params(self.config_, seed=self.seed)
        self.n_features_in_ = n_features
        self.classes_ = np.arange(self.n_classes)
        return self

    def fit(self, x, y, x_val=None, y_val=None):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if x_val is None:
            x_val, y_val = x, y
        self.init_params(x.shape[1])
        weights = self.class_weights
        if weights is not None and not isinstance(weights, str):
            weights = tuple(weights)
        cfg = _training.TrainConfig(
            batch_size=self.batch_size, learning_rate=self.learning_rate,
            weight_decay=self.weight_decay, class_weights=weights,
            max_epochs=self.max_epochs, patience=self.patience, seed=self.seed)
        self.history_ = _training.train(
            self.params_, self.config_, cfg, x, y,
            np.asarray(x_val, dtype=np.float64), np.asarray(y_val, dtype=np.int64))
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("FlowTransformerClassifier has no parameters")

    # -- inference ----------------------------------------------------------

    def decision_function(self, x) -> np.ndarray:
        """Raw logits, shape (n, n_classes)."""
        self._check_fitted()
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        chunks = []
        for start in range(0, len(x), max(self.batch_size, 1)):
            batch = Tensor(x[start:start + self.batch_size])
            chunks.append(_model.forward(self.params_, batch, self.config_).data)
        return np.concatenate(chunks) if chunks else np.zeros((0, self.n_classes))

    def predict_proba(self, x) -> np.ndarray:
        return _softmax_np(self.decision_function(x))

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.decision_function(x), axis=1)

    def input_gradients(self, x, class_index: int) -> np.ndarray:
        """d(logit[class_index])/d(input) per row."""
        self._check_fitted()
        return _model.input_gradients(
            self.params_, np.atleast_2d(np.asarray(x, dtype=np.float64)),
            class_index, self.config_)

    # -- persistence -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        self._check_fitted()
        extra = {"estimator_params": {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
        }}
        _model.save_checkpoint(path, self.params_, self.config_, extra=extra)

    @classmethod
    def load(cls, path: str | Path) -> "FlowTransformerClassifier":
        ckpt = _model.load_checkpoint(path)
        est_params = ckpt.extra.get("estimator_params", {})
        clf = cls(d_model=ckpt.config.d_model, n_layers=ckpt.config.n_layers,
                  n_heads=ckpt.config.n_heads, n_classes=ckpt.config.n_classes,
                  **est_params)
        clf.config_ = ckpt.config
        clf.params_ = _model.params_from_weights(ckpt.weights)
        clf.n_features_in_ = ckpt.config.n_features
        clf.classes_ = np.arange(ckpt.config.n_classes)
        return clf
