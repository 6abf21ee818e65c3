"""Random forest over the CART grower.

Each tree trains on a bootstrap resample (n draws with replacement,
realized as multiplicity weights over the drawn rows) with sqrt(p) feature
subsampling per split. Tree i derives its generator from the master seed
keyed by i, so the ensemble is reproducible regardless of build order.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import FitError
from ..rng import child_rng
from .tree import GINI, grow_tree, _check_width


class RandomForest(BaseEstimator):
    """Bagged Gini trees; prediction is the mean of per-tree distributions.

    Parameters
    ----------
    n_trees : ensemble size
    max_depth, min_leaf : per-tree limits
    max_features : "sqrt" (default), None for all features
    bootstrap : draw n-with-replacement resamples; False trains every tree
        on the full sample (useful to compare against a single tree)
    seed : master seed; tree i uses the child generator keyed by i
    """

    def __init__(self, n_trees=50, max_depth=12, min_leaf=2,
                 max_features="sqrt", bootstrap=True, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed

    def _m_features(self, p):
        if self.max_features is None:
            return None
        if self.max_features == "sqrt":
            return max(1, int(round(math.sqrt(p))))
        return int(self.max_features)

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, p = X.shape
        if n == 0:
            raise FitError("cannot fit a forest on empty input")
        m = self._m_features(p)
        self.trees_ = []
        self.in_bag_ = []
        for i in range(self.n_trees):
            rng = child_rng(self.seed, "tree", i)
            if self.bootstrap:
                draws = rng.integers(0, n, size=n)
                rows, counts = np.unique(draws, return_counts=True)
                nodes, _ = grow_tree(X[rows], y[rows], counts.astype(np.float64),
                                     max_depth=self.max_depth,
                                     min_leaf=self.min_leaf,
                                     max_features=m, rng=rng, criterion=GINI)
            else:
                rows = np.arange(n)
                nodes, _ = grow_tree(X, y, None,
                                     max_depth=self.max_depth,
                                     min_leaf=self.min_leaf,
                                     max_features=m, rng=rng, criterion=GINI)
            self.trees_.append(nodes)
            self.in_bag_.append(rows)
        self.n_features_in_ = p
        self._fit_oob(X)
        return self

    def _fit_oob(self, X):
        """Mean class distribution per training row over trees that did not
        see it; rows in every bag get the full-forest prediction."""
        n = X.shape[0]
        total = np.zeros((n, 2))
        hits = np.zeros(n)
        for nodes, rows in zip(self.trees_, self.in_bag_):
            out = np.ones(n, dtype=bool)
            out[rows] = False
            oob = np.nonzero(out)[0]
            if oob.size == 0:
                continue
            leaves = nodes.apply(X[oob])
            total[oob] += nodes.value[leaves]
            hits[oob] += 1
        covered = hits > 0
        proba = self.predict_proba(X)
        proba[covered] = total[covered] / hits[covered, None]
        self.oob_proba_ = proba
        self.oob_covered_ = covered

    def predict_proba(self, X):
        X = _check_width(self, X)
        total = np.zeros((X.shape[0], 2))
        for nodes in self.trees_:
            total += nodes.value[nodes.apply(X)]
        return total / len(self.trees_)

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)
