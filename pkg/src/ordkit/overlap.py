"""Boundary-overlap detection on the majority class.

The majority rows are split into k folds. For each fold a random forest is
trained on the remaining majority rows plus all minority rows, and applied
to the held-out fold; the committee's mean class-0 probability is the
row's majority confidence. Rows with confidence <= 1 - tau are relabeled
as the overlap class (2); minority rows keep label 1.

Confidences do not depend on tau, so a fitted :class:`OverlapDetector`
relabels under any threshold without retraining, which is what the sweep
and threshold-selection helpers rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import BINARY, MAJORITY, MINORITY, OVERLAP, TERNARY, TabularDataset
from .errors import DataError, FitError
from .learners import RandomForest
from .rng import child_rng, child_seed

DEFAULT_TAU_REAL = 0.3
DEFAULT_TAU_TOY = 0.2
DEFAULT_TAU_GRID = (0.20, 0.25, 0.30, 0.35, 0.40, 0.45)
DEFAULT_R_PERCENTS = (3.0, 5.0, 7.0, 9.0)


@dataclass(frozen=True)
class OverlapConfig:
    """Detection parameters; defaults follow the real-data setup."""

    tau: float = DEFAULT_TAU_REAL
    k_folds: int = 2
    n_trees: int = 50
    seed: int = 0
    strict: bool = False
    max_depth: int = 12
    min_leaf: int = 2

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise DataError(f"tau must lie in [0, 1], got {self.tau}")
        if self.k_folds < 2:
            raise DataError(f"k_folds must be at least 2, got {self.k_folds}")
        if self.n_trees < 1:
            raise DataError("n_trees must be positive")


@dataclass(frozen=True)
class OverlapResult:
    """Per-majority-row scores and the resulting ternary assignment."""

    tau: float
    strict: bool
    majority_indices: np.ndarray   # row positions of majority rows
    fold_index: np.ndarray         # fold that scored each majority row
    confidence: np.ndarray         # committee mean class-0 probability
    overlap_mask: np.ndarray       # True where assigned to the overlap class

    @property
    def n_overlap(self) -> int:
        return int(self.overlap_mask.sum())

    @property
    def n_clear(self) -> int:
        return int((~self.overlap_mask).sum())

    def counts(self) -> dict:
        return {"clear_majority": self.n_clear, "overlap": self.n_overlap}

    def overlap_rows(self) -> np.ndarray:
        return self.majority_indices[self.overlap_mask]

    def clear_rows(self) -> np.ndarray:
        return self.majority_indices[~self.overlap_mask]


def kfold_partition(indices, k: int, seed: int):
    """Split indices into k disjoint folds whose sizes differ by at most 1."""
    indices = np.asarray(indices, dtype=np.int64)
    if k > indices.size:
        raise DataError(f"cannot make {k} folds from {indices.size} rows")
    rng = child_rng(seed, "kfold")
    shuffled = indices[rng.permutation(indices.size)]
    return [np.sort(f) for f in np.array_split(shuffled, k)]


class OverlapDetector(BaseEstimator):
    """k-fold committee scorer for majority rows (fit once, relabel per tau).

    After :meth:`fit`, every majority row has a confidence from the one
    forest that never saw it in training; :meth:`transform` applies the
    threshold and returns the ternary dataset plus an :class:`OverlapResult`.
    """

    def __init__(self, tau=DEFAULT_TAU_REAL, k_folds=2, n_trees=50, seed=0,
                 strict=False, max_depth=12, min_leaf=2):
        self.tau = tau
        self.k_folds = k_folds
        self.n_trees = n_trees
        self.seed = seed
        self.strict = strict
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def _config(self) -> OverlapConfig:
        return OverlapConfig(tau=self.tau, k_folds=self.k_folds,
                             n_trees=self.n_trees, seed=self.seed,
                             strict=self.strict, max_depth=self.max_depth,
                             min_leaf=self.min_leaf)

    def fit(self, dataset: TabularDataset) -> "OverlapDetector":
        cfg = self._config()
        if dataset.label_kind != BINARY:
            raise DataError("overlap detection expects a binary-labeled dataset")
        majority = dataset.class_indices(MAJORITY)
        minority = dataset.class_indices(MINORITY)
        if minority.size == 0:
            raise DataError("dataset has no minority rows")
        if majority.size < cfg.k_folds:
            raise DataError(f"{majority.size} majority rows cannot fill "
                            f"{cfg.k_folds} folds")
        X = dataset.features()
        folds = kfold_partition(majority, cfg.k_folds, cfg.seed)
        confidence = np.empty(majority.size)
        fold_of = np.empty(majority.size, dtype=np.int64)
        self.forests_ = []
        self.train_indices_ = []
        for j, fold in enumerate(folds):
            keep = np.setdiff1d(majority, fold, assume_unique=True)
            train_rows = np.concatenate([keep, minority])
            y_train = dataset.y[train_rows]
            if y_train.min() == y_train.max():
                raise FitError(f"fold {j} leaves a single-class training set")
            forest = RandomForest(n_trees=cfg.n_trees, max_depth=cfg.max_depth,
                                  min_leaf=cfg.min_leaf,
                                  seed=child_seed(cfg.seed, "fold", j))
            forest.fit(X[train_rows], y_train)
            proba0 = forest.predict_proba(X[fold])[:, 0]
            pos = np.searchsorted(majority, fold)
            confidence[pos] = proba0
            fold_of[pos] = j
            self.forests_.append(forest)
            self.train_indices_.append(train_rows)
        self.folds_ = folds
        self.majority_indices_ = majority
        self.confidences_ = confidence
        self.fold_index_ = fold_of
        self.fitted_rows_ = dataset.n_rows
        return self

    def result(self, tau=None) -> OverlapResult:
        if tau is None:
            tau = self.tau
        if not 0.0 <= tau <= 1.0:
            raise DataError(f"tau must lie in [0, 1], got {tau}")
        cut = 1.0 - tau
        if self.strict:
            mask = self.confidences_ < cut
        else:
            mask = self.confidences_ <= cut
        return OverlapResult(tau=float(tau), strict=self.strict,
                             majority_indices=self.majority_indices_,
                             fold_index=self.fold_index_,
                             confidence=self.confidences_,
                             overlap_mask=mask)

    def transform(self, dataset: TabularDataset, tau=None):
        """Apply the fitted confidences; returns (ternary dataset, result)."""
        if dataset.n_rows != self.fitted_rows_:
            raise DataError("transform expects the dataset the detector was fitted on")
        res = self.result(tau)
        y = dataset.y.copy()
        y[res.overlap_rows()] = OVERLAP
        return dataset.with_labels(y, TERNARY), res


def detect_overlap(dataset: TabularDataset, cfg: OverlapConfig):
    """Algorithm entry point: returns ``(ternary dataset, OverlapResult)``."""
    det = OverlapDetector(**_cfg_kwargs(cfg))
    det.fit(dataset)
    return det.transform(dataset)


def _cfg_kwargs(cfg: OverlapConfig) -> dict:
    return {"tau": cfg.tau, "k_folds": cfg.k_folds, "n_trees": cfg.n_trees,
            "seed": cfg.seed, "strict": cfg.strict, "max_depth": cfg.max_depth,
            "min_leaf": cfg.min_leaf}


def sweep_tau(dataset: TabularDataset, cfg: OverlapConfig, grid):
    """Relabel under every tau in the grid with shared fold confidences.

    Returns a list of ``(tau, ternary dataset, OverlapResult)`` in grid
    order; forests are trained once.
    """
    grid = list(grid)
    if not grid:
        raise DataError("tau grid is empty")
    det = OverlapDetector(**_cfg_kwargs(cfg)).fit(dataset)
    out = []
    for tau in grid:
        ternary, res = det.transform(dataset, tau=tau)
        out.append((float(tau), ternary, res))
    return out


def select_tau(dataset: TabularDataset, cfg: OverlapConfig, grid,
               r_percent: float):
    """Pick the grid tau whose overlap count is closest to the size rule.

    The target size is min(|minority|, round(r% of |majority|)); ties
    resolve to the smaller tau. Returns ``(tau, counts)`` with counts the
    full (tau, overlap count) curve in grid order.
    """
    grid = list(grid)
    if not grid:
        raise DataError("tau grid is empty")
    det = OverlapDetector(**_cfg_kwargs(cfg)).fit(dataset)
    n_minority = int(dataset.class_indices(MINORITY).size)
    n_majority = int(det.majority_indices_.size)
    target = min(n_minority, int(round(r_percent / 100.0 * n_majority)))
    counts = [(float(tau), det.result(tau).n_overlap) for tau in grid]
    best_tau = None
    best_gap = None
    for tau, count in counts:
        gap = abs(count - target)
        if best_gap is None or gap < best_gap or (gap == best_gap and tau < best_tau):
            best_tau, best_gap = tau, gap
    return best_tau, counts
