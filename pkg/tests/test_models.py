"""Learner behavior: guards, exact invariants, persistence round trips."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from apigram.errors import (
    ConfigError,
    CorruptModel,
    DegenerateData,
    DimensionMismatch,
    NonFiniteInput,
    Unsupported,
    VersionMismatch,
)
from apigram.labels import ALL_LABELS, ClassLabel
from apigram.models import (
    ClassDistribution,
    HyperParams,
    ModelKind,
    load_model,
    predict,
    predict_matrix,
    predict_proba,
    save_model,
    train,
)
from apigram.vectorize import FeatureMatrix

ALL_KINDS = list(ModelKind)

# Small hyperparameters so the whole suite trains dozens of models quickly.
FAST_PARAMS = {
    ModelKind.DECISION_TREE: {},
    ModelKind.RANDOM_FOREST: {"n_trees": 10},
    ModelKind.GRADIENT_BOOSTED_TREES: {"n_rounds": 8},
    ModelKind.K_NEAREST_NEIGHBORS: {},
    ModelKind.MULTINOMIAL_NAIVE_BAYES: {},
    ModelKind.LINEAR_SVM: {"epochs": 10},
}


def _matrix(dense, labels=None, ids=None):
    dense = np.asarray(dense, dtype=float)
    if labels is None:
        labels = [ALL_LABELS[i % 8] for i in range(dense.shape[0])]
    rows = tuple({j: float(v) for j, v in enumerate(r) if v != 0.0} for r in dense)
    return FeatureMatrix(
        rows=rows,
        n_cols=dense.shape[1],
        sample_ids=tuple(ids or (f"s{i}" for i in range(dense.shape[0]))),
        labels=tuple(labels),
    )


def _clustered(rng, per_class=5, dim=16, noise=0.05):
    """Linearly separable 8-class corpus with nonnegative weights."""
    dense, labels = [], []
    for c in range(8):
        for _ in range(per_class):
            x = np.zeros(dim)
            x[2 * c] = 1.0 + noise * rng.random()
            x[2 * c + 1] = 0.5 + noise * rng.random()
            dense.append(x)
            labels.append(ALL_LABELS[c])
    return _matrix(np.array(dense), labels)


def _fast_model(kind, matrix, seed=0):
    return train(kind, matrix, params=HyperParams(seed=seed, values=FAST_PARAMS[kind]))


# ---------------------------------------------------------------------------
# Training guards
# ---------------------------------------------------------------------------

def test_training_requires_two_distinct_classes():
    matrix = _matrix([[1.0], [2.0]], [ClassLabel.TROJAN, ClassLabel.TROJAN])
    for kind in ALL_KINDS:
        with pytest.raises(DegenerateData):
            train(kind, matrix)


def test_training_requires_rows_and_features():
    empty_rows = FeatureMatrix(rows=(), n_cols=3, sample_ids=(), labels=())
    no_features = _matrix(np.zeros((2, 0)), [ClassLabel.TROJAN, ClassLabel.BENIGN])
    with pytest.raises(DegenerateData):
        train(ModelKind.DECISION_TREE, empty_rows)
    with pytest.raises(DegenerateData):
        train(ModelKind.DECISION_TREE, no_features)


def test_training_rejects_non_finite_weights():
    matrix = FeatureMatrix(
        rows=({0: float("nan")}, {0: 1.0}),
        n_cols=1,
        sample_ids=("a", "b"),
        labels=(ClassLabel.TROJAN, ClassLabel.BENIGN),
    )
    with pytest.raises(NonFiniteInput):
        train(ModelKind.DECISION_TREE, matrix)


def test_training_rejects_out_of_range_column_indices():
    matrix = FeatureMatrix(
        rows=({0: 1.0}, {5: 1.0}),
        n_cols=2,
        sample_ids=("a", "b"),
        labels=(ClassLabel.TROJAN, ClassLabel.BENIGN),
    )
    with pytest.raises(DimensionMismatch):
        train(ModelKind.DECISION_TREE, matrix)


def test_training_rejects_misaligned_labels():
    matrix = _matrix([[1.0], [2.0]], [ClassLabel.TROJAN, ClassLabel.BENIGN])
    with pytest.raises(DimensionMismatch):
        train(ModelKind.DECISION_TREE, matrix, labels=[ClassLabel.TROJAN])


def test_hyperparams_reject_unknown_keys_and_bad_ranges():
    matrix = _matrix([[1.0], [2.0]], [ClassLabel.TROJAN, ClassLabel.BENIGN])
    bad = [
        (ModelKind.DECISION_TREE, {"k": 3}),
        (ModelKind.DECISION_TREE, {"max_depth": -1}),
        (ModelKind.DECISION_TREE, {"min_samples_leaf": 0}),
        (ModelKind.RANDOM_FOREST, {"n_trees": 0}),
        (ModelKind.RANDOM_FOREST, {"max_features": "half"}),
        (ModelKind.GRADIENT_BOOSTED_TREES, {"learning_rate": 0.0}),
        (ModelKind.GRADIENT_BOOSTED_TREES, {"learning_rate": 1.5}),
        (ModelKind.GRADIENT_BOOSTED_TREES, {"n_rounds": 0}),
        (ModelKind.K_NEAREST_NEIGHBORS, {"k": 0}),
        (ModelKind.MULTINOMIAL_NAIVE_BAYES, {"alpha": 0.0}),
        (ModelKind.LINEAR_SVM, {"epochs": 0}),
        (ModelKind.LINEAR_SVM, {"reg_lambda": 0.0}),
    ]
    for kind, values in bad:
        with pytest.raises(ConfigError):
            train(kind, matrix, params=HyperParams(values=values))


def test_model_kind_aliases():
    assert ModelKind.from_name("gbt") is ModelKind.GRADIENT_BOOSTED_TREES
    assert ModelKind.from_name("svm") is ModelKind.LINEAR_SVM
    assert ModelKind.from_name("nb") is ModelKind.MULTINOMIAL_NAIVE_BAYES
    assert ModelKind.from_name("RandomForest") is ModelKind.RANDOM_FOREST
    with pytest.raises(ConfigError):
        ModelKind.from_name("perceptron")


# ---------------------------------------------------------------------------
# Decision tree
# ---------------------------------------------------------------------------

def test_tree_memorizes_four_distinct_rows():
    matrix = _matrix([[0.0], [1.0], [2.0], [3.0]], list(ALL_LABELS[:4]))
    model = train(ModelKind.DECISION_TREE, matrix)
    assert predict_matrix(model, matrix) == list(ALL_LABELS[:4])


def test_tree_split_ties_prefer_the_lowest_feature():
    matrix = _matrix([[0.0, 0.0], [1.0, 1.0]], [ClassLabel.TROJAN, ClassLabel.BENIGN])
    model = train(ModelKind.DECISION_TREE, matrix)
    root = model.learner.nodes[0]
    assert root["f"] == 0
    assert root["t"] == pytest.approx(0.5)


def test_tree_split_ties_prefer_the_lowest_threshold():
    labels = [ClassLabel.TROJAN, ClassLabel.BENIGN, ClassLabel.TROJAN]
    matrix = _matrix([[0.0], [1.0], [2.0]], labels)
    model = train(ModelKind.DECISION_TREE, matrix)
    assert model.learner.nodes[0]["t"] == pytest.approx(0.5)


def test_unbounded_tree_fits_distinct_rows_perfectly():
    rng = np.random.default_rng(83)
    for _ in range(10):
        n = int(rng.integers(8, 40))
        dense = rng.random((n, 5))
        labels = [ALL_LABELS[int(rng.integers(0, 8))] for _ in range(n)]
        if len({label.ordinal for label in labels}) < 2:
            labels[0] = ALL_LABELS[0]
            labels[1] = ALL_LABELS[1]
        matrix = _matrix(dense, labels)
        model = train(ModelKind.DECISION_TREE, matrix)
        assert predict_matrix(model, matrix) == labels


def test_tree_fit_is_invariant_under_row_permutation():
    rng = np.random.default_rng(89)
    dense = rng.integers(0, 4, size=(24, 6)).astype(float)
    labels = [ALL_LABELS[int(rng.integers(0, 8))] for i in range(24)]
    base = train(ModelKind.DECISION_TREE, _matrix(dense, labels))
    perm = rng.permutation(24)
    shuffled = train(
        ModelKind.DECISION_TREE, _matrix(dense[perm], [labels[i] for i in perm])
    )
    assert base.learner.to_payload() == shuffled.learner.to_payload()


def test_depth_one_tree_has_a_single_split():
    rng = np.random.default_rng(97)
    matrix = _clustered(rng)
    model = train(
        ModelKind.DECISION_TREE, matrix, params=HyperParams(values={"max_depth": 1})
    )
    internal = [n for n in model.learner.nodes if "f" in n]
    assert len(internal) == 1


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------

def test_forest_without_randomness_reduces_to_the_single_tree():
    rng = np.random.default_rng(101)
    matrix = _clustered(rng)
    tree = train(ModelKind.DECISION_TREE, matrix)
    forest = train(
        ModelKind.RANDOM_FOREST,
        matrix,
        params=HyperParams(
            values={"n_trees": 1, "bootstrap": False, "max_features": "all"}
        ),
    )
    assert forest.learner.trees[0] == tree.learner.nodes
    assert predict_matrix(forest, matrix) == predict_matrix(tree, matrix)


def test_forest_probabilities_are_vote_fractions():
    rng = np.random.default_rng(103)
    matrix = _clustered(rng)
    model = _fast_model(ModelKind.RANDOM_FOREST, matrix, seed=7)
    for row in matrix.rows[:16]:
        dist = predict_proba(model, row)
        votes = [p * 10 for p in dist.probabilities]
        assert all(abs(v - round(v)) < 1e-9 for v in votes)
        assert math.fsum(dist.probabilities) == pytest.approx(1.0, abs=1e-12)
        assert dist.argmax() == predict(model, row)


def test_forest_training_is_seed_deterministic():
    rng = np.random.default_rng(107)
    matrix = _clustered(rng, per_class=4)
    first = _fast_model(ModelKind.RANDOM_FOREST, matrix, seed=5)
    second = _fast_model(ModelKind.RANDOM_FOREST, matrix, seed=5)
    other = _fast_model(ModelKind.RANDOM_FOREST, matrix, seed=6)
    assert first.learner.to_payload() == second.learner.to_payload()
    assert first.learner.to_payload() != other.learner.to_payload()


# ---------------------------------------------------------------------------
# Gradient-boosted trees
# ---------------------------------------------------------------------------

def test_boosting_training_loss_descends_monotonically():
    rng = np.random.default_rng(109)
    matrix = _clustered(rng, per_class=4)
    model = train(
        ModelKind.GRADIENT_BOOSTED_TREES,
        matrix,
        params=HyperParams(values={"n_rounds": 20, "learning_rate": 0.3}),
    )
    losses = model.learner.train_loss
    assert len(losses) == 21
    assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_boosting_gives_absent_classes_zero_probability():
    labels = [ClassLabel.TROJAN] * 3 + [ClassLabel.BENIGN] * 3
    dense = [[1.0, 0.0]] * 3 + [[0.0, 1.0]] * 3
    model = train(
        ModelKind.GRADIENT_BOOSTED_TREES,
        _matrix(dense, labels),
        params=HyperParams(values={"n_rounds": 5}),
    )
    dist = predict_proba(model, {0: 1.0})
    present = {ClassLabel.TROJAN.ordinal, ClassLabel.BENIGN.ordinal}
    for ordinal, p in enumerate(dist.probabilities):
        if ordinal not in present:
            assert p == 0.0
    assert math.fsum(dist.probabilities) == pytest.approx(1.0, abs=1e-12)
    assert predict(model, {0: 1.0}) is ClassLabel.TROJAN


# ---------------------------------------------------------------------------
# k-nearest neighbors
# ---------------------------------------------------------------------------

def test_knn_with_k_one_recalls_each_training_row():
    rng = np.random.default_rng(113)
    matrix = _clustered(rng)
    model = train(
        ModelKind.K_NEAREST_NEIGHBORS, matrix, params=HyperParams(values={"k": 1})
    )
    assert predict_matrix(model, matrix) == list(matrix.labels)


def test_knn_distance_ties_resolve_to_the_earlier_training_row():
    matrix = _matrix(
        [[1.0, 0.0], [0.0, 1.0]], [ClassLabel.WORM, ClassLabel.ADWARE]
    )
    model = train(
        ModelKind.K_NEAREST_NEIGHBORS, matrix, params=HyperParams(values={"k": 1})
    )
    assert predict(model, {0: 1.0, 1: 1.0}) is ClassLabel.WORM


def test_knn_vote_ties_resolve_to_the_lower_class_ordinal():
    matrix = _matrix(
        [[1.0, 0.0], [0.0, 1.0]], [ClassLabel.SPYWARE, ClassLabel.BACKDOOR]
    )
    model = train(
        ModelKind.K_NEAREST_NEIGHBORS, matrix, params=HyperParams(values={"k": 2})
    )
    winner = predict(model, {0: 1.0, 1: 1.0})
    assert winner is min(ClassLabel.SPYWARE, ClassLabel.BACKDOOR, key=lambda l: l.ordinal)


def test_knn_probabilities_are_neighbor_vote_fractions():
    rng = np.random.default_rng(127)
    matrix = _clustered(rng)
    model = train(ModelKind.K_NEAREST_NEIGHBORS, matrix)
    dist = predict_proba(model, matrix.rows[0])
    assert all(abs(p * 5 - round(p * 5)) < 1e-12 for p in dist.probabilities)
    assert math.fsum(dist.probabilities) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Naive Bayes
# ---------------------------------------------------------------------------

def test_bayes_prefers_the_class_that_owns_the_vocabulary():
    labels = [ClassLabel.DOWNLOADER] * 3 + [ClassLabel.VIRUS] * 3
    dense = [[1.0, 0.5, 0.0, 0.0]] * 3 + [[0.0, 0.0, 1.0, 0.5]] * 3
    model = train(ModelKind.MULTINOMIAL_NAIVE_BAYES, _matrix(dense, labels))
    assert predict(model, {0: 2.0}) is ClassLabel.DOWNLOADER
    assert predict(model, {3: 2.0}) is ClassLabel.VIRUS


def test_bayes_uniform_classes_give_uniform_posterior_on_an_empty_row():
    dense = np.eye(8)
    model = train(ModelKind.MULTINOMIAL_NAIVE_BAYES, _matrix(dense, list(ALL_LABELS)))
    dist = predict_proba(model, {})
    assert dist.probabilities == pytest.approx((0.125,) * 8, abs=1e-12)


def test_bayes_argmax_is_scale_invariant_under_uniform_priors():
    rng = np.random.default_rng(131)
    matrix = _clustered(rng)
    model = train(ModelKind.MULTINOMIAL_NAIVE_BAYES, matrix)
    for _ in range(50):
        row = {
            int(j): float(abs(rng.normal()))
            for j in rng.choice(16, size=4, replace=False)
        }
        base = predict(model, row)
        for scale in (0.25, 3.0):
            scaled = {j: w * scale for j, w in row.items()}
            assert predict(model, scaled) is base


def test_bayes_fit_is_invariant_under_row_permutation():
    rng = np.random.default_rng(137)
    dense = np.abs(rng.normal(size=(24, 6))) * (rng.random((24, 6)) < 0.5)
    labels = [ALL_LABELS[int(rng.integers(0, 8))] for _ in range(24)]
    base = train(ModelKind.MULTINOMIAL_NAIVE_BAYES, _matrix(dense, labels))
    perm = rng.permutation(24)
    shuffled = train(
        ModelKind.MULTINOMIAL_NAIVE_BAYES,
        _matrix(dense[perm], [labels[i] for i in perm]),
    )
    assert base.learner.to_payload() == shuffled.learner.to_payload()


def test_bayes_rejects_negative_weights():
    matrix = FeatureMatrix(
        rows=({0: -1.0}, {0: 1.0}),
        n_cols=1,
        sample_ids=("a", "b"),
        labels=(ClassLabel.TROJAN, ClassLabel.BENIGN),
    )
    with pytest.raises(DegenerateData):
        train(ModelKind.MULTINOMIAL_NAIVE_BAYES, matrix)


# ---------------------------------------------------------------------------
# Linear SVM
# ---------------------------------------------------------------------------

def test_svm_separates_a_separable_corpus():
    rng = np.random.default_rng(139)
    matrix = _clustered(rng)
    model = train(ModelKind.LINEAR_SVM, matrix)
    assert predict_matrix(model, matrix) == list(matrix.labels)


def test_svm_has_no_probability_output():
    rng = np.random.default_rng(149)
    matrix = _clustered(rng, per_class=3)
    model = _fast_model(ModelKind.LINEAR_SVM, matrix)
    with pytest.raises(Unsupported):
        predict_proba(model, matrix.rows[0])


def test_svm_training_is_seed_deterministic():
    rng = np.random.default_rng(151)
    matrix = _clustered(rng, per_class=3)
    first = _fast_model(ModelKind.LINEAR_SVM, matrix, seed=9)
    second = _fast_model(ModelKind.LINEAR_SVM, matrix, seed=9)
    assert first.learner.to_payload() == second.learner.to_payload()


# ---------------------------------------------------------------------------
# Shared prediction surface
# ---------------------------------------------------------------------------

def test_batch_prediction_matches_per_row_prediction():
    rng = np.random.default_rng(157)
    matrix = _clustered(rng, per_class=3)
    queries = np.abs(rng.normal(size=(20, 16))) * (rng.random((20, 16)) < 0.4)
    query_matrix = _matrix(queries)
    for kind in ALL_KINDS:
        model = _fast_model(kind, matrix)
        batch = predict_matrix(model, query_matrix)
        single = [predict(model, row) for row in query_matrix.rows]
        assert batch == single, kind


def test_prediction_rejects_out_of_range_indices_and_widths():
    rng = np.random.default_rng(163)
    matrix = _clustered(rng, per_class=3)
    model = train(ModelKind.DECISION_TREE, matrix)
    with pytest.raises(DimensionMismatch):
        predict(model, {16: 1.0})
    with pytest.raises(DimensionMismatch):
        predict(model, [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        predict_matrix(model, _matrix(np.zeros((2, 3))))


def test_class_distribution_invariants():
    uniform = (0.125,) * 8
    assert ClassDistribution(uniform).argmax() is ALL_LABELS[0]
    with pytest.raises(DimensionMismatch):
        ClassDistribution((0.5, 0.5))
    with pytest.raises(DimensionMismatch):
        ClassDistribution((1.5, -0.5) + (0.0,) * 6)
    with pytest.raises(DimensionMismatch):
        ClassDistribution((0.9,) + (0.0,) * 7)
    peaked = (0.0, 0.0, 0.6, 0.0, 0.4, 0.0, 0.0, 0.0)
    assert ClassDistribution(peaked).argmax() is ALL_LABELS[2]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def test_saved_models_reload_with_identical_behavior(tmp_path):
    rng = np.random.default_rng(167)
    matrix = _clustered(rng, per_class=3)
    queries = [
        {
            int(j): float(abs(rng.normal()))
            for j in rng.choice(16, size=int(rng.integers(1, 6)), replace=False)
        }
        for _ in range(100)
    ]
    for kind in ALL_KINDS:
        model = _fast_model(kind, matrix, seed=3)
        path = tmp_path / f"{kind.value}.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.kind is kind
        assert loaded.dim == model.dim
        assert loaded.hyperparams == model.hyperparams
        assert loaded.seed == model.seed
        assert loaded.data_fingerprint == model.data_fingerprint
        for row in queries:
            assert predict(loaded, row) is predict(model, row)
            if kind is not ModelKind.LINEAR_SVM:
                before = predict_proba(model, row).probabilities
                after = predict_proba(loaded, row).probabilities
                assert before == after


def test_truncated_model_file_is_reported_corrupt(tmp_path):
    rng = np.random.default_rng(173)
    model = train(ModelKind.DECISION_TREE, _clustered(rng, per_class=2))
    path = tmp_path / "model.json"
    save_model(model, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptModel):
        load_model(path)


def test_non_object_model_file_is_reported_corrupt(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("[1,2,3]")
    with pytest.raises(CorruptModel):
        load_model(path)


def test_future_format_version_is_rejected(tmp_path):
    rng = np.random.default_rng(179)
    model = train(ModelKind.DECISION_TREE, _clustered(rng, per_class=2))
    path = tmp_path / "model.json"
    save_model(model, path)
    document = json.loads(path.read_text())
    document["format_version"] = 2
    path.write_text(json.dumps(document))
    with pytest.raises(VersionMismatch):
        load_model(path)


def test_unknown_kind_in_model_file_is_reported_corrupt(tmp_path):
    rng = np.random.default_rng(181)
    model = train(ModelKind.DECISION_TREE, _clustered(rng, per_class=2))
    path = tmp_path / "model.json"
    save_model(model, path)
    document = json.loads(path.read_text())
    document["kind"] = "Perceptron"
    path.write_text(json.dumps(document))
    with pytest.raises(CorruptModel):
        load_model(path)


def test_fingerprint_tracks_training_data_order():
    dense = [[1.0], [2.0]]
    labels = [ClassLabel.TROJAN, ClassLabel.BENIGN]
    a = train(ModelKind.DECISION_TREE, _matrix(dense, labels, ids=["a", "b"]))
    b = train(ModelKind.DECISION_TREE, _matrix(dense, labels, ids=["b", "a"]))
    assert a.data_fingerprint != b.data_fingerprint
