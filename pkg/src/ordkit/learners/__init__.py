"""From-scratch supervised learners used across the pipeline."""

from .boosting import AdaBoost, GradientBoosting
from .forest import RandomForest
from .linear import LogisticRegression, logistic_objective, sigmoid
from .mlp import MlpClassifier, mlp_objective
from .serialize import load_model, model_from_doc, model_to_doc, save_model
from .tree import DecisionTree, grow_tree

__all__ = [
    "AdaBoost",
    "DecisionTree",
    "GradientBoosting",
    "LogisticRegression",
    "MlpClassifier",
    "RandomForest",
    "grow_tree",
    "load_model",
    "logistic_objective",
    "mlp_objective",
    "model_from_doc",
    "model_to_doc",
    "save_model",
    "sigmoid",
]
