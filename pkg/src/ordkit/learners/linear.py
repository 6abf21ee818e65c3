"""Logistic regression by full-batch gradient descent.

The objective is the mean logistic loss plus an l2/2 * ||w||^2 penalty on
the weights (bias unpenalized). Inputs are expected standardized/one-hot.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import FitError
from .tree import _check_width


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def log_loss(z, y):
    """Mean of softplus(z) - y*z, the numerically safe logistic loss."""
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


class LogisticRegression(BaseEstimator):
    def __init__(self, steps=500, learning_rate=0.1, l2=1e-4):
        self.steps = steps
        self.learning_rate = learning_rate
        self.l2 = l2

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n, p = X.shape
        w = np.zeros(p)
        b = 0.0
        losses = []
        for step in range(self.steps):
            z = X @ w + b
            loss = log_loss(z, y) + 0.5 * self.l2 * float(w @ w)
            if not np.isfinite(loss):
                raise FitError(f"non-finite logistic loss at step {step} "
                               f"(lr={self.learning_rate}, l2={self.l2})")
            losses.append(loss)
            err = sigmoid(z) - y
            w -= self.learning_rate * (X.T @ err / n + self.l2 * w)
            b -= self.learning_rate * float(err.mean())
        if not (np.isfinite(w).all() and np.isfinite(b)):
            raise FitError("non-finite weights after training")
        self.weights_ = w
        self.bias_ = b
        self.losses_ = losses
        self.n_features_in_ = p
        return self

    def decision_function(self, X):
        X = _check_width(self, X)
        return X @ self.weights_ + self.bias_

    def predict_proba(self, X):
        p1 = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(np.int64)


def logistic_objective(X, y, w, b, l2):
    """Loss and analytic gradients; exposed for gradient checking."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    z = X @ w + b
    loss = log_loss(z, y) + 0.5 * l2 * float(w @ w)
    err = sigmoid(z) - y
    grad_w = X.T @ err / n + l2 * w
    grad_b = float(err.mean())
    return loss, grad_w, grad_b
