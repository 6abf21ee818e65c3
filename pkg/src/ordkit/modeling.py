"""Dataset-level adapter around the learners.

Tree-based models consume the raw cell matrix (categoricals as ordinal
indices, numerics unscaled); the gradient-trained models consume
standardized numerics with one-hot categoricals, using statistics fitted
on their own training data. Ternary label 2 is folded into the majority
class before training, so every learner stays binary.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import Standardizer, TabularDataset, one_hot
from .errors import DataError
from .learners import (AdaBoost, DecisionTree, GradientBoosting,
                       LogisticRegression, MlpClassifier, RandomForest)
from .rng import child_seed

CLASSIFIER_KINDS = ("logistic", "tree", "adaboost", "mlp", "gbdt", "forest")
AVG4_KINDS = ("logistic", "tree", "adaboost", "mlp")
SCALED_KINDS = ("logistic", "mlp")


def make_classifier(kind: str, seed: int = 0, **params):
    if kind == "logistic":
        return LogisticRegression(**params)
    if kind == "tree":
        return DecisionTree(**params)
    if kind == "adaboost":
        return AdaBoost(**params)
    if kind == "mlp":
        return MlpClassifier(seed=child_seed(seed, "mlp"), **params)
    if kind == "gbdt":
        return GradientBoosting(**params)
    if kind == "forest":
        return RandomForest(seed=child_seed(seed, "forest"), **params)
    raise DataError(f"unknown classifier kind {kind!r}; "
                    f"expected one of {CLASSIFIER_KINDS}")


class ClassifierAdapter(BaseEstimator):
    """Fit a classifier kind on a dataset and score datasets or matrices."""

    def __init__(self, kind="gbdt", seed=0, params=None):
        self.kind = kind
        self.seed = seed
        self.params = params

    def _binary_labels(self, dataset):
        return np.where(dataset.y == 2, 0, dataset.y)

    def _encode(self, dataset):
        if self.kind in SCALED_KINDS:
            return one_hot(self.scaler_.transform(dataset))
        return dataset.features()

    def fit(self, dataset: TabularDataset) -> "ClassifierAdapter":
        self.model_ = make_classifier(self.kind, seed=self.seed,
                                      **(self.params or {}))
        self.scaler_ = Standardizer().fit(dataset)
        X = self._encode(dataset)
        self.model_.fit(X, self._binary_labels(dataset))
        return self

    def predict_proba(self, dataset: TabularDataset) -> np.ndarray:
        return self.model_.predict_proba(self._encode(dataset))

    def predict(self, dataset: TabularDataset) -> np.ndarray:
        return self.model_.predict(self._encode(dataset))
