import numpy as np
import pytest
from conftest import make_record
from sklearn.svm import SVC

from src.schemas.demographics import Axis, DemographicLabel, Gender, Race
from src.schemas.svm_schemas import SvmHyperParams
from src.services import smo
from src.services.classifier import (
    OracleClassifier,
    SvmClassifierPair,
    decision_values,
    evaluate,
    format_metrics_table,
    load_model,
    metrics_from_predictions,
    predict,
    predict_many,
    save_model,
    train,
)
from src.utils.errors import (
    DegenerateDataError,
    DimensionMismatchError,
    InputValidationError,
    UnconvergedError,
)

EXACT = SvmHyperParams(c=10.0, gamma=0.5, tolerance=1e-8)


def blobs(per_class, dim, seed, races=(Race.ASIAN, Race.BLACK, Race.WHITE)):
    rng = np.random.default_rng(seed)
    records = []
    for k, race in enumerate(races):
        centre = np.zeros(dim)
        centre[k] = 3.0
        for i in range(per_class):
            vector = centre + rng.standard_normal(dim)
            records.append(make_record(f"{race.value}-{seed}-{i:03d}", vector, race.value, "Female"))
    return records


def random_problem(seed, n=20, dim=3):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    y = np.where(np.arange(n) < n // 2, 1.0, -1.0)
    return x, y


# =========================================================
# Small exact problems
# =========================================================
def test_two_points_split_at_midpoint():
    records = [make_record("b", [0.0, 1.0], "Black", "Male"), make_record("w", [2.0, 1.0], "White", "Male")]
    model = train(records, Axis.RACE, EXACT)
    [binary] = model.binaries
    assert binary.class_pair == ("Black", "White")
    assert decision_values(binary, np.array([[1.0, 1.0]]))[0] == pytest.approx(0.0, abs=1e-9)
    assert predict(model, [0.2, 1.0]).category == "Black"
    assert predict(model, [1.8, 1.0]).category == "White"


def test_xor_is_separable_with_rbf():
    points = {(1, 1): "Female", (-1, -1): "Female", (1, -1): "Male", (-1, 1): "Male"}
    records = [make_record(f"p{i}", xy, "Asian", g) for i, (xy, g) in enumerate(points.items())]
    model = train(records, Axis.GENDER, SvmHyperParams(c=10.0, gamma=1.0, tolerance=1e-8))
    for xy, g in points.items():
        assert predict(model, xy).category == g
    assert predict(model, (0.9, 1.1)).category == "Female"
    assert predict(model, (0.8, -1.2)).category == "Male"


def test_votes_cover_every_pair():
    model = train(blobs(10, 4, seed=0), Axis.RACE)
    prediction = predict(model, [3.0, 0.0, 0.0, 0.0])
    assert prediction.category == "Asian"
    assert sum(prediction.votes.values()) == 3
    assert prediction.votes["Asian"] == 2


# =========================================================
# Accuracy on separable clouds
# =========================================================
def test_separable_blobs_accuracy():
    model = train(blobs(120, 16, seed=42), Axis.RACE)
    metrics = evaluate(model, blobs(40, 16, seed=43))
    assert metrics.classes == ["Asian", "Black", "White"]
    assert metrics.accuracy >= 0.95


def test_parallel_training_is_identical():
    records = blobs(30, 8, seed=5)
    assert train(records, Axis.RACE, parallelism=1) == train(records, Axis.RACE, parallelism=3)


def test_predict_many_matches_predict():
    model = train(blobs(20, 6, seed=9), Axis.RACE)
    x = np.random.default_rng(1).standard_normal((300, 6)) * 2
    batch = predict_many(model, x)
    assert [p.category for p in batch[::37]] == [predict(model, row).category for row in x[::37]]


# =========================================================
# SMO solver
# =========================================================
@pytest.mark.parametrize("seed", range(25))
def test_smo_matches_libsvm_decision_values(seed):
    x, y = random_problem(seed)
    solution = smo.solve(x, y, c=1.0, gamma=0.5, tolerance=1e-6)
    ours = smo.rbf_rows(x, x, 0.5) @ (solution.alpha * y) - solution.rho

    reference = SVC(kernel="rbf", C=1.0, gamma=0.5, tol=1e-8).fit(x, y)
    assert ours == pytest.approx(reference.decision_function(x), abs=1e-3)


def test_smo_satisfies_kkt():
    x, y = random_problem(100, n=40)
    solution = smo.solve(x, y, c=2.0, gamma=0.3, tolerance=1e-6)
    decision = smo.rbf_rows(x, x, 0.3) @ (solution.alpha * y) - solution.rho
    assert np.all(solution.alpha >= 0) and np.all(solution.alpha <= 2.0)
    assert float(np.dot(solution.alpha, y)) == pytest.approx(0.0, abs=1e-9)
    assert smo.kkt_violation(solution.alpha, y, decision, 2.0) <= 1e-3


def test_kernel_cache_does_not_change_the_solution():
    x, y = random_problem(7, n=30)
    cached = smo.solve(x, y, c=1.0, gamma=0.5, cache_rows=4)
    uncached = smo.solve(x, y, c=1.0, gamma=0.5, cache_rows=0)
    assert np.array_equal(cached.alpha, uncached.alpha)
    assert cached.rho == uncached.rho


def test_kernel_cache_evicts_least_recent():
    x, _ = random_problem(0, n=5)
    cache = smo.KernelRowCache(x, 0.5, capacity=2)
    first = cache.row(0).copy()
    cache.row(1)
    cache.row(0)
    cache.row(2)
    cache.row(1)
    assert cache.misses == 4
    assert cache.hits == 1
    assert np.array_equal(cache.row(0), first)


def test_smo_iteration_cap():
    x, y = random_problem(3)
    with pytest.raises(UnconvergedError):
        smo.solve(x, y, c=1.0, gamma=0.5, tolerance=1e-6, max_iterations=1)


# =========================================================
# Error cases
# =========================================================
def test_single_class_corpus():
    records = [make_record(f"b{i}", [float(i + 1), 1.0], "Black", "Male") for i in range(5)]
    with pytest.raises(InputValidationError, match="single-class corpus"):
        train(records, Axis.RACE)


def test_identical_embeddings_are_degenerate():
    records = [make_record("a", [1.0, 1.0], "Black", "Male"), make_record("b", [1.0, 1.0], "White", "Male")]
    with pytest.raises(DegenerateDataError, match="inseparable degenerate data"):
        train(records, Axis.RACE)


def test_unlabeled_and_cell_axis_rejected():
    with pytest.raises(InputValidationError, match="unlabeled"):
        train([make_record("a", [1.0])], Axis.RACE)
    with pytest.raises(InputValidationError, match="per axis"):
        train(blobs(3, 3, seed=0), Axis.CELL)


def test_predict_dimension_mismatch():
    model = train(blobs(5, 4, seed=0), Axis.RACE)
    with pytest.raises(DimensionMismatchError):
        predict(model, [1.0, 2.0])


def test_evaluate_rejects_unseen_class():
    model = train(blobs(5, 4, seed=0, races=(Race.ASIAN, Race.BLACK)), Axis.RACE)
    with pytest.raises(InputValidationError, match="not seen in training"):
        evaluate(model, blobs(2, 4, seed=1, races=(Race.WHITE,)))


# =========================================================
# Metrics
# =========================================================
def test_metrics_from_confusion():
    y_true = ["Female"] * 10 + ["Male"] * 10
    y_pred = ["Female"] * 8 + ["Male"] * 2 + ["Female"] * 3 + ["Male"] * 7
    metrics = metrics_from_predictions(Axis.GENDER, ["Female", "Male"], y_true, y_pred)
    assert metrics.confusion == [[8, 2], [3, 7]]
    assert metrics.accuracy == pytest.approx(0.75)
    assert metrics.macro_recall == pytest.approx(0.75)
    assert metrics.macro_precision == pytest.approx((8 / 11 + 7 / 9) / 2)

    table = format_metrics_table({"gender": metrics})
    assert "Accuracy" in table
    assert "75.0%" in table


# =========================================================
# Persistence and classifier pairs
# =========================================================
def test_save_and_load_model(tmp_path):
    model = train(blobs(10, 4, seed=2), Axis.RACE)
    path = save_model(model, tmp_path / "models" / "race.json")
    loaded = load_model(path)
    assert loaded == model
    x = np.random.default_rng(0).standard_normal((20, 4))
    assert [p.category for p in predict_many(loaded, x)] == [p.category for p in predict_many(model, x)]


def test_load_model_errors(tmp_path):
    with pytest.raises(InputValidationError, match="not found"):
        load_model(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"axis": "race"}', encoding="utf-8")
    with pytest.raises(InputValidationError, match="invalid model file"):
        load_model(bad)


def test_classifier_pair_labels_blob_records(blob_records):
    pair = SvmClassifierPair(train(blob_records, Axis.RACE), train(blob_records, Axis.GENDER))
    assert pair.dim == 4
    labels = pair.classify(blob_records)
    assert labels == [r.true_label for r in blob_records]
    assert pair.classify([]) == []


def test_classifier_pair_rejects_swapped_models(blob_records):
    race = train(blob_records, Axis.RACE)
    with pytest.raises(InputValidationError):
        SvmClassifierPair(race, race)


def test_oracle_classifier():
    oracle = OracleClassifier()
    label = DemographicLabel(Race.INDIAN, Gender.FEMALE)
    assert oracle.classify([make_record("a", [1.0], "Indian", "Female")]) == [label]
    with pytest.raises(InputValidationError, match="no ground-truth"):
        oracle.classify([make_record("b", [1.0])])
