"""From-scratch classifiers (decision tree, random forest, linear SVM, MLP)
plus the shared evaluation suite."""

from .base import (
    EvalReport,
    ModelSpec,
    TrainedModel,
    compare_models,
    evaluate,
    predict,
    train,
)

__all__ = [
    "EvalReport",
    "ModelSpec",
    "TrainedModel",
    "compare_models",
    "evaluate",
    "predict",
    "train",
]
