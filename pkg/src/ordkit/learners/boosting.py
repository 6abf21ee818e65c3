"""Boosted tree ensembles: discrete AdaBoost with stumps and gradient
boosting with logistic loss and Newton leaf values.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import FitError
from .linear import sigmoid, log_loss
from .tree import GINI, MSE, grow_tree, _check_width

ALPHA_CAP = math.log(1e6)
PRIOR_LOGIT_CAP = 10.0
HESSIAN_FLOOR = 1e-12


def _prior_logit(y):
    p = float(np.mean(y))
    if p <= 0.0:
        return -PRIOR_LOGIT_CAP
    if p >= 1.0:
        return PRIOR_LOGIT_CAP
    return float(np.clip(math.log(p / (1.0 - p)), -PRIOR_LOGIT_CAP, PRIOR_LOGIT_CAP))


class AdaBoost(BaseEstimator):
    """Discrete AdaBoost over depth-1 Gini stumps.

    A round is accepted only while the chosen stump's weighted error is
    below 0.5; a zero-error stump is recorded with its alpha clipped at
    ln(1e6) and training stops. With no accepted rounds the model predicts
    the majority prior.
    """

    def __init__(self, n_rounds=100, alpha_cap=ALPHA_CAP):
        self.n_rounds = n_rounds
        self.alpha_cap = alpha_cap

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = X.shape[0]
        if n == 0:
            raise FitError("cannot boost on empty input")
        sign = 2.0 * y - 1.0
        w = np.full(n, 1.0 / n)
        self.stages_ = []
        self.errors_ = []
        for _ in range(self.n_rounds):
            nodes, _ = grow_tree(X, y, w, max_depth=1, min_leaf=1, criterion=GINI)
            pred = (nodes.value[nodes.apply(X)][:, 1] >= 0.5).astype(np.float64)
            err = float(w[pred != y].sum())
            if err >= 0.5:
                break
            alpha = self.alpha_cap if err <= 0.0 else \
                min(self.alpha_cap, 0.5 * math.log((1.0 - err) / err))
            self.stages_.append((nodes, alpha))
            self.errors_.append(err)
            if err <= 0.0:
                break
            w = w * np.exp(-alpha * sign * (2.0 * pred - 1.0))
            w /= w.sum()
        self.prior_logit_ = _prior_logit(y)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = _check_width(self, X)
        if not self.stages_:
            return np.full(X.shape[0], self.prior_logit_)
        raw = np.zeros(X.shape[0])
        for nodes, alpha in self.stages_:
            h = (nodes.value[nodes.apply(X)][:, 1] >= 0.5).astype(np.float64)
            raw += alpha * (2.0 * h - 1.0)
        return raw

    def predict_proba(self, X):
        p1 = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(np.int64)


class GradientBoosting(BaseEstimator):
    """Gradient boosting with logistic loss.

    Each stage fits a squared-error tree to the residuals y - p; leaf
    values take one Newton step sum(y - p) / sum(p * (1 - p)) with the
    denominator floored at 1e-12. The raw score starts from the prior
    log-odds (clamped to +/-10), so all-one-class input yields a
    prior-only model.
    """

    def __init__(self, n_rounds=200, shrinkage=0.1, max_depth=3, min_leaf=2):
        self.n_rounds = n_rounds
        self.shrinkage = shrinkage
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = X.shape[0]
        if n == 0:
            raise FitError("cannot boost on empty input")
        self.prior_logit_ = _prior_logit(y)
        raw = np.full(n, self.prior_logit_)
        self.stages_ = []
        self.losses_ = [log_loss(raw, y)]
        if y.min() == y.max():
            return self._finish(X)
        for _ in range(self.n_rounds):
            p = sigmoid(raw)
            residual = y - p
            nodes, leaf_rows = grow_tree(X, residual, None,
                                         max_depth=self.max_depth,
                                         min_leaf=self.min_leaf,
                                         criterion=MSE, collect_leaf_rows=True)
            hess = p * (1.0 - p)
            for leaf, rows in leaf_rows.items():
                g = residual[rows].sum()
                h = max(hess[rows].sum(), HESSIAN_FLOOR)
                nodes.value[leaf, 0] = g / h
            self.stages_.append(nodes)
            raw = raw + self.shrinkage * nodes.value[nodes.apply(X), 0]
            self.losses_.append(log_loss(raw, y))
        return self._finish(X)

    def _finish(self, X):
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = _check_width(self, X)
        raw = np.full(X.shape[0], self.prior_logit_)
        for nodes in self.stages_:
            raw += self.shrinkage * nodes.value[nodes.apply(X), 0]
        return raw

    def predict_proba(self, X):
        p1 = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(np.int64)
