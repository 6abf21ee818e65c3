"""One-hidden-layer rectifier MLP trained by full-batch gradient descent."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import FitError
from ..rng import child_rng
from .linear import sigmoid, log_loss
from .tree import _check_width


def _init_layers(rng, d, h):
    a1 = math.sqrt(6.0 / (d + h))
    a2 = math.sqrt(6.0 / (h + 1))
    W1 = rng.uniform(-a1, a1, size=(d, h))
    W2 = rng.uniform(-a2, a2, size=h)
    return W1, np.zeros(h), W2, 0.0


def mlp_objective(X, y, W1, b1, W2, b2):
    """Logistic loss of the forward pass plus analytic gradients."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    z1 = X @ W1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ W2 + b2
    loss = log_loss(z2, y)
    delta2 = (sigmoid(z2) - y) / n
    gW2 = a1.T @ delta2
    gb2 = float(delta2.sum())
    delta1 = np.outer(delta2, W2) * (z1 > 0.0)
    gW1 = X.T @ delta1
    gb1 = delta1.sum(axis=0)
    return loss, gW1, gb1, gW2, gb2


class MlpClassifier(BaseEstimator):
    """Input -> hidden rectifier layer -> single logit.

    Weights initialize uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))
    from the seed; biases start at zero. Training is deterministic in the
    seed (full batch, no dropout).
    """

    def __init__(self, hidden=32, steps=500, learning_rate=0.05, seed=0):
        self.hidden = hidden
        self.steps = steps
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        rng = child_rng(self.seed, "mlp-init")
        W1, b1, W2, b2 = _init_layers(rng, X.shape[1], self.hidden)
        losses = []
        for step in range(self.steps):
            loss, gW1, gb1, gW2, gb2 = mlp_objective(X, y, W1, b1, W2, b2)
            if not np.isfinite(loss):
                raise FitError(f"non-finite MLP loss at step {step} "
                               f"(lr={self.learning_rate})")
            losses.append(loss)
            W1 -= self.learning_rate * gW1
            b1 -= self.learning_rate * gb1
            W2 -= self.learning_rate * gW2
            b2 -= self.learning_rate * gb2
        self.W1_, self.b1_, self.W2_, self.b2_ = W1, b1, W2, b2
        self.losses_ = losses
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = _check_width(self, X)
        a1 = np.maximum(X @ self.W1_ + self.b1_, 0.0)
        return a1 @ self.W2_ + self.b2_

    def predict_proba(self, X):
        p1 = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(np.int64)
