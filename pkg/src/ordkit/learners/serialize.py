"""Versioned JSON serialization of trained models, for experiment caching.

The format is documented by example in the README; stability across
package versions is not guaranteed.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import DataError
from .boosting import AdaBoost, GradientBoosting
from .forest import RandomForest
from .linear import LogisticRegression
from .mlp import MlpClassifier
from .tree import DecisionTree, _Nodes

FORMAT_VERSION = 1


def _nodes_to_doc(nodes):
    return {
        "feature": nodes.feature.tolist(),
        "threshold": [None if np.isnan(t) else t for t in nodes.threshold],
        "left": nodes.left.tolist(),
        "right": nodes.right.tolist(),
        "value": nodes.value.tolist(),
    }


def _nodes_from_doc(doc):
    thr = [np.nan if t is None else t for t in doc["threshold"]]
    return _Nodes(doc["feature"], thr, doc["left"], doc["right"], doc["value"])


def model_to_doc(model) -> dict:
    doc = {"format_version": FORMAT_VERSION,
           "params": model.get_params(),
           "n_features_in": int(model.n_features_in_)}
    if isinstance(model, DecisionTree):
        doc["kind"] = "tree"
        doc["nodes"] = _nodes_to_doc(model.nodes_)
    elif isinstance(model, RandomForest):
        doc["kind"] = "forest"
        doc["trees"] = [_nodes_to_doc(t) for t in model.trees_]
        doc["in_bag"] = [rows.tolist() for rows in model.in_bag_]
    elif isinstance(model, LogisticRegression):
        doc["kind"] = "logistic"
        doc["weights"] = model.weights_.tolist()
        doc["bias"] = model.bias_
    elif isinstance(model, AdaBoost):
        doc["kind"] = "adaboost"
        doc["stages"] = [{"nodes": _nodes_to_doc(n), "alpha": a}
                         for n, a in model.stages_]
        doc["prior_logit"] = model.prior_logit_
    elif isinstance(model, GradientBoosting):
        doc["kind"] = "gbdt"
        doc["stages"] = [_nodes_to_doc(n) for n in model.stages_]
        doc["prior_logit"] = model.prior_logit_
    elif isinstance(model, MlpClassifier):
        doc["kind"] = "mlp"
        doc["W1"] = model.W1_.tolist()
        doc["b1"] = model.b1_.tolist()
        doc["W2"] = model.W2_.tolist()
        doc["b2"] = model.b2_
    else:
        raise DataError(f"cannot serialize model of type {type(model).__name__}")
    return doc


def model_from_doc(doc) -> object:
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {doc.get('format_version')!r}")
    kind = doc["kind"]
    params = doc["params"]
    if kind == "tree":
        model = DecisionTree(**params)
        model.nodes_ = _nodes_from_doc(doc["nodes"])
    elif kind == "forest":
        model = RandomForest(**params)
        model.trees_ = [_nodes_from_doc(d) for d in doc["trees"]]
        model.in_bag_ = [np.asarray(r, dtype=np.int64) for r in doc["in_bag"]]
    elif kind == "logistic":
        model = LogisticRegression(**params)
        model.weights_ = np.asarray(doc["weights"], dtype=np.float64)
        model.bias_ = float(doc["bias"])
    elif kind == "adaboost":
        model = AdaBoost(**params)
        model.stages_ = [(_nodes_from_doc(s["nodes"]), float(s["alpha"]))
                         for s in doc["stages"]]
        model.prior_logit_ = float(doc["prior_logit"])
    elif kind == "gbdt":
        model = GradientBoosting(**params)
        model.stages_ = [_nodes_from_doc(d) for d in doc["stages"]]
        model.prior_logit_ = float(doc["prior_logit"])
    elif kind == "mlp":
        model = MlpClassifier(**params)
        model.W1_ = np.asarray(doc["W1"], dtype=np.float64)
        model.b1_ = np.asarray(doc["b1"], dtype=np.float64)
        model.W2_ = np.asarray(doc["W2"], dtype=np.float64)
        model.b2_ = float(doc["b2"])
    else:
        raise DataError(f"unknown model kind {kind!r}")
    model.n_features_in_ = int(doc["n_features_in"])
    return model


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_doc(model), fh)


def load_model(path) -> object:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_doc(json.load(fh))
