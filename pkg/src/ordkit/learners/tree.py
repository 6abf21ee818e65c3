"""CART decision trees: weighted-Gini classification and squared-error
regression on a shared array-based grower.

Splits are midpoints between consecutive sorted distinct values of a
feature. Ties among equal-gain splits resolve to the lowest column index,
then the lowest threshold, so training is fully deterministic. Categorical
columns are split ordinally on their integer index.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import FitError

GINI = "gini"
MSE = "mse"


class _Nodes:
    """Flat array representation of a grown tree."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    def apply(self, X):
        """Leaf index reached by every row of X."""
        idx = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[idx]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                return idx
            rows = active
            f = feat[rows]
            go_left = X[rows, f] <= self.threshold[idx[rows]]
            nxt = np.where(go_left, self.left[idx[rows]], self.right[idx[rows]])
            idx[rows] = nxt


def _best_split_gini(Xn, wy, wn, feats, min_leaf, parent_cost, W, W1):
    """Best (cost, feature, threshold) under weighted Gini, or None.

    Weighted Gini cost of a child with total weight wl and class-1 weight
    wl1 is wl * (1 - p0^2 - p1^2) = wl - (wl1^2 + (wl - wl1)^2) / wl.
    """
    n = wn.shape[0]
    best = None
    counts = np.arange(1, n)
    for f in feats:
        v = Xn[:, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        ok = vs[1:] > vs[:-1]
        ok &= (counts >= min_leaf) & (n - counts >= min_leaf)
        if not ok.any():
            continue
        cw = np.cumsum(wn[order])[:-1]
        cwy = np.cumsum(wy[order])[:-1]
        wl = cw[ok]
        wl1 = cwy[ok]
        wr = W - wl
        wr1 = W1 - wl1
        cost = (wl - (wl1 * wl1 + (wl - wl1) ** 2) / wl) \
             + (wr - (wr1 * wr1 + (wr - wr1) ** 2) / wr)
        j = int(np.argmin(cost))
        c = float(cost[j])
        if c >= parent_cost - 1e-12:
            continue
        if best is None or c < best[0]:
            pos = np.nonzero(ok)[0][j]
            thr = (vs[pos] + vs[pos + 1]) / 2.0
            best = (c, int(f), float(thr))
    return best


def _best_split_mse(Xn, g, wn, feats, min_leaf, parent_cost):
    """Best split minimizing the weighted sum of squared residuals."""
    n = wn.shape[0]
    best = None
    counts = np.arange(1, n)
    wg_all = wn * g
    wg2_all = wg_all * g
    G = wg_all.sum()
    G2 = wg2_all.sum()
    W = wn.sum()
    for f in feats:
        v = Xn[:, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        ok = vs[1:] > vs[:-1]
        ok &= (counts >= min_leaf) & (n - counts >= min_leaf)
        if not ok.any():
            continue
        cw = np.cumsum(wn[order])[:-1][ok]
        cwg = np.cumsum(wg_all[order])[:-1][ok]
        cwg2 = np.cumsum(wg2_all[order])[:-1][ok]
        cost = (cwg2 - cwg * cwg / cw) + ((G2 - cwg2) - (G - cwg) ** 2 / (W - cw))
        j = int(np.argmin(cost))
        c = float(cost[j])
        if c >= parent_cost - 1e-12:
            continue
        if best is None or c < best[0]:
            pos = np.nonzero(ok)[0][j]
            thr = (vs[pos] + vs[pos + 1]) / 2.0
            best = (c, int(f), float(thr))
    return best


def grow_tree(X, y, w, *, max_depth, min_leaf, max_features=None, rng=None,
              criterion=GINI, collect_leaf_rows=False):
    """Grow a CART tree; returns ``(_Nodes, leaf_rows | None)``.

    For ``criterion="gini"`` node values are (p0, p1) class distributions;
    for ``criterion="mse"`` node values are weighted means of ``y``.
    ``max_features`` subsamples candidate features per split through ``rng``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(X.shape[0]) if w is None else np.asarray(w, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise FitError("cannot fit a tree on empty input")
    if criterion == GINI and y.size and not np.isin(y, (0.0, 1.0)).all():
        raise FitError("classification trees require binary 0/1 labels")

    feature, threshold, left, right, values = [], [], [], [], []
    leaf_rows = {} if collect_leaf_rows else None

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        values.append(None)
        return len(feature) - 1

    def leaf_value(rows):
        wr = w[rows]
        if criterion == GINI:
            total = wr.sum()
            w1 = (wr * y[rows]).sum()
            return np.array([(total - w1) / total, w1 / total])
        return np.array([(wr * y[rows]).sum() / wr.sum()])

    root = new_node()
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        yn = y[rows]
        make_leaf = (depth >= max_depth or rows.size < 2 * min_leaf
                     or yn.min() == yn.max())
        best = None
        if not make_leaf:
            Xn = X[rows]
            wn = w[rows]
            W = wn.sum()
            if max_features is None or max_features >= p:
                feats = range(p)
            else:
                feats = np.sort(rng.choice(p, size=max_features, replace=False))
            if criterion == GINI:
                wy = wn * yn
                w1 = wy.sum()
                parent = W - (w1 * w1 + (W - w1) ** 2) / W
                best = _best_split_gini(Xn, wy, wn, feats, min_leaf, parent, W, w1)
            else:
                wg = wn * yn
                parent = (wn * yn * yn).sum() - wg.sum() ** 2 / W
                best = _best_split_mse(Xn, yn, wn, feats, min_leaf, parent)
        if best is None:
            values[node] = leaf_value(rows)
            if collect_leaf_rows:
                leaf_rows[node] = rows
            continue
        _, f, thr = best
        go_left = X[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        lid, rid = new_node(), new_node()
        left[node] = lid
        right[node] = rid
        # push right first so the left child is processed next (DFS order
        # fixes the rng consumption sequence)
        stack.append((rid, rows[~go_left], depth + 1))
        stack.append((lid, rows[go_left], depth + 1))

    width = 2 if criterion == GINI else 1
    val = np.zeros((len(feature), width))
    for i, v in enumerate(values):
        if v is not None:
            val[i] = v
    nodes = _Nodes(feature, threshold, left, right, val)
    return nodes, leaf_rows


class DecisionTree(BaseEstimator):
    """Greedy weighted-Gini CART classifier.

    Parameters
    ----------
    max_depth : maximum split depth (root at depth 0)
    min_leaf : minimum rows per child
    """

    def __init__(self, max_depth=12, min_leaf=2):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y, sample_weight=None):
        self.nodes_, _ = grow_tree(X, y, sample_weight,
                                   max_depth=self.max_depth,
                                   min_leaf=self.min_leaf,
                                   criterion=GINI)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def predict_proba(self, X):
        X = _check_width(self, X)
        leaves = self.nodes_.apply(X)
        return self.nodes_.value[leaves]

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)


def _check_width(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features_in_:
        raise FitError(f"expected {model.n_features_in_} features, "
                       f"got shape {X.shape}")
    return X
