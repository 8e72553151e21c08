"""scikit-learn compatible wrapper around the 1-D CNN training engine."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..dataset import Dataset
from ..validation import as_feature_matrix, as_label_vector
from . import network as net
from .layers import softmax_forward


class ConvNet1DClassifier(ClassifierMixin, BaseEstimator):
    """1-D convolutional classifier with fit/predict/predict_proba.

    Thin estimator facade over the functional training core so the model
    composes with sklearn pipelines and model selection. Training is
    deterministic in `seed` (single-threaded).
    """

    def __init__(self, epochs=10, batch_size=8, learning_rate=0.01, momentum=0.9, seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.seed = seed

    def fit(self, X, y, validation=None):
        """Train on (X, y). `validation` is an optional (X_val, y_val) pair;
        the training data doubles as validation when omitted."""
        X = as_feature_matrix(X)
        y = as_label_vector(y, n_rows=X.shape[0])
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need at least 2 classes to fit")
        self.n_features_in_ = X.shape[1]

        train = Dataset(X, y_idx, "train")
        if validation is None:
            val = Dataset(X, y_idx, "test")
        else:
            xv = as_feature_matrix(validation[0], "X_val")
            yv = as_label_vector(validation[1], n_rows=xv.shape[0], name="y_val")
            val = Dataset(xv, np.searchsorted(self.classes_, yv), "test")

        self.arch_ = net.default_arch(self.n_features_in_, int(self.classes_.size))
        w0 = net.init_weights(self.arch_, self.seed)
        self.weights_, self.history_ = net.train_local(
            self.arch_,
            w0,
            train,
            val,
            epochs=self.epochs,
            batch=self.batch_size,
            lr=self.learning_rate,
            momentum=self.momentum,
            seed=self.seed,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise RuntimeError("this ConvNet1DClassifier instance is not fitted yet")

    def predict_proba(self, X):
        self._check_fitted()
        X = as_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        logits, _ = net._forward_batch(self.arch_, self.weights_.tensors, X)
        return softmax_forward(logits)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[proba.argmax(axis=1)]
