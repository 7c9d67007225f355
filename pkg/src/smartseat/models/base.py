"""Model specs, the train/predict surface, and the evaluation suite."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..dataset import LabeledDataset
from ..errors import InsufficientClassesError, InvalidInputError
from ..postures import POSTURES
from . import forest, mlp, svm, tree

KINDS = ("dt", "rf", "svm", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    """Hyperparameters for one of the four classifier kinds.

    Only the fields relevant to ``kind`` are read: DT uses max_depth and
    min_leaf; RF adds n_trees, feature_subsample and seed; SVM uses c;
    MLP uses hidden, epochs, learning_rate, batch_size and seed.
    """

    kind: str
    max_depth: int | None = None
    min_leaf: int = 1
    n_trees: int = 100
    feature_subsample: int | None = None
    c: float = 1.0
    hidden: tuple[int, ...] = (16,)
    epochs: int = 60
    learning_rate: float = 0.05
    batch_size: int = 32
    svm_tol: float = 1e-4
    svm_max_epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown model kind {self.kind!r}; expected {KINDS}")
        if self.c <= 0:
            raise InvalidInputError("SVM C must be positive")
        if self.n_trees < 1:
            raise InvalidInputError("n_trees must be at least 1")
        if any(h < 1 for h in self.hidden):
            raise InvalidInputError("hidden layer widths must be positive")

    @classmethod
    def dt(cls, **kw) -> "ModelSpec":
        return cls(kind="dt", **{"max_depth": None, "min_leaf": 1, **kw})

    @classmethod
    def rf(cls, **kw) -> "ModelSpec":
        return cls(kind="rf", **{"n_trees": 100, "max_depth": 12, **kw})

    @classmethod
    def svm(cls, **kw) -> "ModelSpec":
        return cls(kind="svm", **{"c": 1.0, **kw})

    @classmethod
    def mlp(cls, **kw) -> "ModelSpec":
        return cls(kind="mlp", **{"hidden": (16,), "epochs": 60, **kw})


def paper_specs(seed: int = 0) -> list[ModelSpec]:
    """The four stock classifier configurations, one per kind."""
    return [
        ModelSpec.mlp(seed=seed),
        ModelSpec.svm(seed=seed),
        ModelSpec.dt(seed=seed),
        ModelSpec.rf(seed=seed),
    ]


@dataclass
class TrainedModel:
    spec: ModelSpec
    class_names: tuple[str, ...]
    params: tree.DtParams | forest.RfParams | svm.SvmParams | mlp.MlpParams
    training_digest: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_features(self) -> int:
        return _expected_width(self)

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        X = _check_features(X, batch=True)
        if self.kind == "dt":
            return tree.tree_predict(self.params, X)
        if self.kind == "rf":
            return forest.forest_predict(self.params, X, self.n_classes)
        if self.kind == "svm":
            return svm.svm_predict(self.params, X)
        return mlp.mlp_predict(self.params, X)

    def confidences(self, X: np.ndarray) -> np.ndarray:
        X = _check_features(X, batch=True)
        if self.kind == "dt":
            return tree.tree_confidence(self.params, X)
        if self.kind == "rf":
            return forest.forest_confidence(self.params, X, self.n_classes)
        if self.kind == "svm":
            return svm.svm_confidence(self.params, X)
        return mlp.mlp_confidence(self.params, X)

    def predict_one(self, features) -> str:
        idx = self.predict_indices(np.asarray(features, dtype=float).reshape(1, -1))
        return self.class_names[int(idx[0])]

    def predict_one_with_confidence(self, features) -> tuple[str, float]:
        X = np.asarray(features, dtype=float).reshape(1, -1)
        idx = int(self.predict_indices(X)[0])
        conf = float(np.clip(self.confidences(X)[0], 0.0, 1.0))
        return self.class_names[idx], conf

    def equals(self, other: "TrainedModel") -> bool:
        return (
            self.spec == other.spec
            and self.class_names == other.class_names
            and self.params.equals(other.params)
        )


def _check_features(X: np.ndarray, batch: bool) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if batch:
        if X.ndim != 2:
            raise InvalidInputError("feature batch must be 2-D")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("features must be finite")
    return X


def train(spec: ModelSpec, train_ds: LabeledDataset) -> TrainedModel:
    """Fit one model; deterministic per (spec, seed). Never sees test rows."""
    if len(train_ds) == 0:
        raise InvalidInputError("training set is empty")
    X = _check_features(train_ds.features, batch=True)
    y = train_ds.label_indices()
    n_classes = len(train_ds.class_names)
    if spec.kind in ("svm", "mlp"):
        present = set(y.tolist())
        missing = [name for i, name in enumerate(train_ds.class_names) if i not in present]
        if missing:
            raise InsufficientClassesError(
                f"{spec.kind} one-vs-rest training needs every class present; missing {missing}"
            )
    t0 = time.perf_counter()
    if spec.kind == "dt":
        params = tree.train_tree(X, y, n_classes, spec.max_depth, spec.min_leaf)
    elif spec.kind == "rf":
        params = forest.train_forest(
            X, y, n_classes,
            n_trees=spec.n_trees,
            max_depth=spec.max_depth if spec.max_depth is not None else 12,
            min_leaf=spec.min_leaf,
            feature_subsample=spec.feature_subsample,
            seed=spec.seed,
        )
    elif spec.kind == "svm":
        params = svm.train_svm(X, y, n_classes, c=spec.c, tol=spec.svm_tol,
                               max_epochs=spec.svm_max_epochs)
    else:
        params = mlp.train_mlp(
            X, y, n_classes,
            hidden=spec.hidden,
            epochs=spec.epochs,
            learning_rate=spec.learning_rate,
            batch_size=spec.batch_size,
            seed=spec.seed,
        )
    return TrainedModel(
        spec=spec,
        class_names=train_ds.class_names,
        params=params,
        training_digest={
            "n_train": len(train_ds),
            "seed": spec.seed,
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def predict(model: TrainedModel, features) -> str:
    """Posture label for one 10-count feature vector (ties resolve to the
    lowest class index)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 1:
        raise InvalidInputError("predict takes a single 1-D feature vector")
    if features.size != _expected_width(model):
        raise InvalidInputError(
            f"expected {_expected_width(model)} features, got {features.size}"
        )
    return model.predict_one(features)


def _expected_width(model: TrainedModel) -> int:
    p = model.params
    if isinstance(p, svm.SvmParams):
        return p.weights.shape[1]
    if isinstance(p, mlp.MlpParams):
        return p.weights[0].shape[0]
    return 10


@dataclass
class EvalReport:
    """Accuracy, confusion matrix (rows = true, cols = predicted) and
    F1 scores for one model on one test set."""

    model_kind: str
    accuracy: float
    confusion: np.ndarray
    f1_micro: float
    f1_macro: float
    per_class: list[dict]
    n_test: int

    def to_text(self, class_names: tuple[str, ...] = POSTURES) -> str:
        lines = [
            f"model: {self.model_kind}",
            f"accuracy: {self.accuracy:.4f}   micro-F1: {self.f1_micro:.4f}   "
            f"macro-F1: {self.f1_macro:.4f}   n: {self.n_test}",
            f"{'class':<16} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}",
        ]
        for row in self.per_class:
            lines.append(
                f"{row['class']:<16} {row['precision']:>9.4f} {row['recall']:>9.4f} "
                f"{row['f1']:>9.4f} {row['support']:>8d}"
            )
        return "\n".join(lines)

    def confusion_csv(self, class_names: tuple[str, ...]) -> str:
        lines = ["true\\pred," + ",".join(class_names)]
        for i, name in enumerate(class_names):
            lines.append(name + "," + ",".join(str(int(v)) for v in self.confusion[i]))
        return "\n".join(lines) + "\n"


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def report_from_confusion(cm: np.ndarray, model_kind: str,
                          class_names: tuple[str, ...]) -> EvalReport:
    n = int(cm.sum())
    tp = np.diag(cm).astype(float)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    accuracy = float(tp.sum() / n) if n else 0.0
    # The binary F1 = TP / (TP + (FN+FP)/2) generalized: micro pools the
    # counts over classes, macro averages the per-class scores.
    pooled_tp, pooled_fp, pooled_fn = tp.sum(), fp.sum(), fn.sum()
    f1_micro = float(pooled_tp / (pooled_tp + (pooled_fn + pooled_fp) / 2.0)) if n else 0.0
    per_class = []
    f1s = []
    for i, name in enumerate(class_names):
        denom = tp[i] + (fn[i] + fp[i]) / 2.0
        f1 = float(tp[i] / denom) if denom > 0 else 0.0
        precision = float(tp[i] / (tp[i] + fp[i])) if tp[i] + fp[i] > 0 else 0.0
        recall = float(tp[i] / (tp[i] + fn[i])) if tp[i] + fn[i] > 0 else 0.0
        support = int(cm[i].sum())
        per_class.append(
            {"class": name, "precision": precision, "recall": recall, "f1": f1,
             "support": support}
        )
        f1s.append(f1)
    return EvalReport(
        model_kind=model_kind,
        accuracy=accuracy,
        confusion=cm,
        f1_micro=f1_micro,
        f1_macro=float(np.mean(f1s)),
        per_class=per_class,
        n_test=n,
    )


def evaluate(model: TrainedModel, test_ds: LabeledDataset) -> EvalReport:
    if len(test_ds) == 0:
        raise InvalidInputError("test set is empty")
    y_true = test_ds.label_indices()
    y_pred = model.predict_indices(test_ds.features)
    cm = confusion_matrix(y_true, y_pred, model.n_classes)
    return report_from_confusion(cm, model.kind, model.class_names)


def compare_models(
    specs: list[ModelSpec],
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
) -> list[tuple[TrainedModel, EvalReport]]:
    """Train and evaluate every spec; results sorted by accuracy descending
    with macro-F1 as the tie-break. The first entry is the export winner."""
    if len(specs) < 2:
        raise InvalidInputError("compare_models needs at least 2 specs")
    results = []
    for spec in specs:
        model = train(spec, train_ds)
        results.append((model, evaluate(model, test_ds)))
    results.sort(key=lambda mr: (-mr[1].accuracy, -mr[1].f1_macro))
    return results
