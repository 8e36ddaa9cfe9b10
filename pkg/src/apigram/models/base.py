"""Shared learner plumbing: kinds, hyperparameters, dispatch, persistence.

Every learner trains on a sparse FeatureMatrix plus aligned labels and
predicts over the fixed 8-class roster. Classes absent from the training
data keep probability zero at prediction time. Model files are JSON with
a versioned header; the recorded seed plus the training-data order (a
fingerprint of the ordered sample ids) pin down stochastic learners.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    ConfigError,
    CorruptModel,
    DegenerateData,
    DimensionMismatch,
    NonFiniteInput,
    Unsupported,
    VersionMismatch,
)
from ..labels import ALL_LABELS, ClassLabel, N_CLASSES
from ..vectorize import FeatureMatrix

FORMAT_VERSION = 1


class ModelKind(enum.Enum):
    DECISION_TREE = "DecisionTree"
    RANDOM_FOREST = "RandomForest"
    GRADIENT_BOOSTED_TREES = "GradientBoostedTrees"
    K_NEAREST_NEIGHBORS = "KNearestNeighbors"
    MULTINOMIAL_NAIVE_BAYES = "MultinomialNaiveBayes"
    LINEAR_SVM = "LinearSVM"

    @staticmethod
    def from_name(name: str) -> "ModelKind":
        for kind in ModelKind:
            if kind.value == name:
                return kind
        aliases = {
            "decision_tree": ModelKind.DECISION_TREE,
            "random_forest": ModelKind.RANDOM_FOREST,
            "gradient_boosted_trees": ModelKind.GRADIENT_BOOSTED_TREES,
            "gbt": ModelKind.GRADIENT_BOOSTED_TREES,
            "knn": ModelKind.K_NEAREST_NEIGHBORS,
            "k_nearest_neighbors": ModelKind.K_NEAREST_NEIGHBORS,
            "naive_bayes": ModelKind.MULTINOMIAL_NAIVE_BAYES,
            "nb": ModelKind.MULTINOMIAL_NAIVE_BAYES,
            "linear_svm": ModelKind.LINEAR_SVM,
            "svm": ModelKind.LINEAR_SVM,
        }
        key = name.strip().lower()
        if key in aliases:
            return aliases[key]
        raise ConfigError(f"unknown model kind {name!r}")


# Documented defaults per kind; every value is overridable and the
# resolved set is recorded into the model file.
DEFAULT_PARAMS: dict[ModelKind, dict[str, object]] = {
    ModelKind.DECISION_TREE: {"max_depth": 0, "min_samples_leaf": 1},
    ModelKind.RANDOM_FOREST: {
        "n_trees": 100,
        "bootstrap": True,
        "max_features": "sqrt",
        "max_depth": 0,
        "min_samples_leaf": 1,
    },
    ModelKind.GRADIENT_BOOSTED_TREES: {
        "n_rounds": 200,
        "learning_rate": 0.1,
        "max_depth": 6,
        "min_samples_leaf": 1,
        "reg_lambda": 1.0,
    },
    ModelKind.K_NEAREST_NEIGHBORS: {"k": 5},
    ModelKind.MULTINOMIAL_NAIVE_BAYES: {"alpha": 1.0},
    ModelKind.LINEAR_SVM: {"reg_lambda": 1e-4, "epochs": 50},
}


@dataclass(frozen=True)
class HyperParams:
    """Per-kind settings plus the training seed."""

    seed: int = 0
    values: dict[str, object] = field(default_factory=dict)

    def resolve(self, kind: ModelKind) -> dict[str, object]:
        """Merge with the kind's defaults, rejecting unknown keys and
        out-of-range values."""
        defaults = DEFAULT_PARAMS[kind]
        unknown = set(self.values) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown {kind.value} settings: {sorted(unknown)}")
        merged = dict(defaults)
        merged.update(self.values)
        _validate_params(kind, merged)
        return merged


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _validate_params(kind: ModelKind, p: dict[str, object]) -> None:
    if kind in (ModelKind.DECISION_TREE, ModelKind.RANDOM_FOREST,
                ModelKind.GRADIENT_BOOSTED_TREES):
        _require(int(p["max_depth"]) >= 0, "max_depth must be >= 0 (0 = unlimited)")
        _require(int(p["min_samples_leaf"]) >= 1, "min_samples_leaf must be >= 1")
    if kind is ModelKind.RANDOM_FOREST:
        _require(int(p["n_trees"]) >= 1, "n_trees must be >= 1")
        mf = p["max_features"]
        _require(
            mf in ("sqrt", "all") or (isinstance(mf, int) and mf >= 1),
            "max_features must be 'sqrt', 'all', or a positive integer",
        )
    if kind is ModelKind.GRADIENT_BOOSTED_TREES:
        _require(int(p["n_rounds"]) >= 1, "n_rounds must be >= 1")
        _require(0.0 < float(p["learning_rate"]) <= 1.0, "learning_rate must be in (0, 1]")
        _require(float(p["reg_lambda"]) >= 0.0, "reg_lambda must be >= 0")
    if kind is ModelKind.K_NEAREST_NEIGHBORS:
        _require(int(p["k"]) >= 1, "k must be >= 1")
    if kind is ModelKind.MULTINOMIAL_NAIVE_BAYES:
        _require(float(p["alpha"]) > 0.0, "alpha must be > 0")
    if kind is ModelKind.LINEAR_SVM:
        _require(float(p["reg_lambda"]) > 0.0, "reg_lambda must be > 0")
        _require(int(p["epochs"]) >= 1, "epochs must be >= 1")


@dataclass(frozen=True)
class ClassDistribution:
    """Probability vector over the 8 classes in ordinal order."""

    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probabilities) != N_CLASSES:
            raise DimensionMismatch(f"distribution must have {N_CLASSES} entries")
        if any(p < 0.0 for p in self.probabilities):
            raise DimensionMismatch("probabilities must be nonnegative")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-9:
            raise DimensionMismatch("probabilities must sum to 1")

    def argmax(self) -> ClassLabel:
        best = max(range(N_CLASSES), key=lambda c: (self.probabilities[c], -c))
        return ALL_LABELS[best]


class Learner:
    """Interface every concrete learner implements."""

    def predict_ordinal(self, x: np.ndarray) -> int:
        raise NotImplementedError

    def predict_proba_vector(self, x: np.ndarray) -> np.ndarray:
        raise Unsupported(f"{type(self).__name__} does not emit probabilities")

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_ordinal(x) for x in X], dtype=np.int64)

    def to_payload(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_payload(cls, payload: dict, dim: int) -> "Learner":
        raise NotImplementedError


@dataclass(frozen=True)
class TrainedModel:
    kind: ModelKind
    dim: int
    classes: tuple[ClassLabel, ...]
    hyperparams: dict[str, object]
    seed: int
    data_fingerprint: str
    learner: Learner


def _dense_row(row: dict[int, float] | list[float] | np.ndarray, dim: int) -> np.ndarray:
    if isinstance(row, dict):
        x = np.zeros(dim, dtype=np.float64)
        for j, w in row.items():
            if not isinstance(j, int) or j < 0 or j >= dim:
                raise DimensionMismatch(f"row index {j} outside [0, {dim})")
            x[j] = w
        return x
    x = np.asarray(row, dtype=np.float64)
    if x.shape != (dim,):
        raise DimensionMismatch(f"row has shape {x.shape}, expected ({dim},)")
    return x


def _data_fingerprint(matrix: FeatureMatrix) -> str:
    digest = hashlib.sha256()
    for sid in matrix.sample_ids:
        digest.update(sid.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


def train(
    kind: ModelKind,
    matrix: FeatureMatrix,
    labels: list[ClassLabel] | None = None,
    params: HyperParams | None = None,
) -> TrainedModel:
    """Fit one learner; deterministic given the data order and seed."""
    from . import bayes, boosting, cart, forest, neighbors, svm

    if labels is None:
        labels = list(matrix.labels)
    if len(labels) != matrix.n_rows:
        raise DimensionMismatch("labels do not align with matrix rows")
    if matrix.n_rows == 0 or matrix.n_cols == 0:
        raise DegenerateData("training needs at least one row and one feature")
    if len({label.ordinal for label in labels}) < 2:
        raise DegenerateData("training needs at least two distinct classes")
    for i, row in enumerate(matrix.rows):
        for j, w in row.items():
            if not math.isfinite(w):
                raise NonFiniteInput(f"non-finite weight at row {i}, col {j}")
            if j < 0 or j >= matrix.n_cols:
                raise DimensionMismatch(f"row {i} index {j} outside [0, {matrix.n_cols})")

    params = params or HyperParams()
    resolved = params.resolve(kind)
    y = np.array([label.ordinal for label in labels], dtype=np.int64)

    trainers = {
        ModelKind.DECISION_TREE: cart.fit,
        ModelKind.RANDOM_FOREST: forest.fit,
        ModelKind.GRADIENT_BOOSTED_TREES: boosting.fit,
        ModelKind.K_NEAREST_NEIGHBORS: neighbors.fit,
        ModelKind.MULTINOMIAL_NAIVE_BAYES: bayes.fit,
        ModelKind.LINEAR_SVM: svm.fit,
    }
    learner = trainers[kind](matrix, y, resolved, params.seed)
    return TrainedModel(
        kind=kind,
        dim=matrix.n_cols,
        classes=ALL_LABELS,
        hyperparams=resolved,
        seed=params.seed,
        data_fingerprint=_data_fingerprint(matrix),
        learner=learner,
    )


def predict(model: TrainedModel, row: dict[int, float] | list[float] | np.ndarray) -> ClassLabel:
    x = _dense_row(row, model.dim)
    return ALL_LABELS[model.learner.predict_ordinal(x)]


def predict_proba(model: TrainedModel, row) -> ClassDistribution:
    x = _dense_row(row, model.dim)
    p = model.learner.predict_proba_vector(x)
    return ClassDistribution(probabilities=tuple(float(v) for v in p))


def predict_matrix(model: TrainedModel, matrix: FeatureMatrix) -> list[ClassLabel]:
    if matrix.n_cols != model.dim:
        raise DimensionMismatch(
            f"matrix has {matrix.n_cols} columns, model expects {model.dim}"
        )
    ordinals = model.learner.predict_batch(matrix.to_dense())
    return [ALL_LABELS[int(o)] for o in ordinals]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _learner_class(kind: ModelKind):
    from . import bayes, boosting, cart, forest, neighbors, svm

    return {
        ModelKind.DECISION_TREE: cart.DecisionTreeLearner,
        ModelKind.RANDOM_FOREST: forest.RandomForestLearner,
        ModelKind.GRADIENT_BOOSTED_TREES: boosting.GradientBoostedTreesLearner,
        ModelKind.K_NEAREST_NEIGHBORS: neighbors.KNearestNeighborsLearner,
        ModelKind.MULTINOMIAL_NAIVE_BAYES: bayes.NaiveBayesLearner,
        ModelKind.LINEAR_SVM: svm.LinearSvmLearner,
    }[kind]


def save_model(model: TrainedModel, path: str | Path) -> None:
    document = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind.value,
        "dim": model.dim,
        "classes": [label.value for label in model.classes],
        "hyperparams": model.hyperparams,
        "seed": model.seed,
        "data_fingerprint": model.data_fingerprint,
        "payload": model.learner.to_payload(),
    }
    Path(path).write_text(
        json.dumps(document, sort_keys=True, separators=(",", ":")), encoding="utf-8"
    )


def load_model(path: str | Path) -> TrainedModel:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptModel(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(document, dict):
        raise CorruptModel(f"model file {path} is not a JSON object")
    version = document.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"model format {version!r}, expected {FORMAT_VERSION}")
    try:
        kind = ModelKind(document["kind"])
        dim = int(document["dim"])
        classes = tuple(ClassLabel.from_name(name) for name in document["classes"])
        if classes != ALL_LABELS:
            raise KeyError("class roster mismatch")
        learner = _learner_class(kind).from_payload(document["payload"], dim)
        return TrainedModel(
            kind=kind,
            dim=dim,
            classes=classes,
            hyperparams=dict(document["hyperparams"]),
            seed=int(document["seed"]),
            data_fingerprint=str(document.get("data_fingerprint", "")),
            learner=learner,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptModel(f"model file {path} is malformed: {exc}") from exc
