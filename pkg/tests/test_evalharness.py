import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamefusion.evalharness import (FoldAssignment, MetricsReport, confusion_matrix, cross_validate, fold_seed,
                                    majority_accuracy, metrics, normalize_rows, normalized_confusion,
                                    stratified_folds, write_predictions)
from gamefusion.trainer import TrainConfig


def brute_force_metrics(cm):
    """Expand the matrix to label lists and count by hand."""
    y_true, y_pred = [], []
    for t in range(2):
        for p in range(2):
            y_true += [t] * int(cm[t][p])
            y_pred += [p] * int(cm[t][p])
    n = len(y_true)
    acc = sum(a == b for a, b in zip(y_true, y_pred)) / n
    wp = wr = 0.0
    for c in range(2):
        tp = sum(1 for a, b in zip(y_true, y_pred) if a == c and b == c)
        pred_c = sum(1 for b in y_pred if b == c)
        true_c = sum(1 for a in y_true if a == c)
        w = true_c / n
        wp += w * (tp / pred_c if pred_c else 0.0)
        wr += w * (tp / true_c if true_c else 0.0)
    f1 = 2 * wp * wr / (wp + wr) if wp + wr else 0.0
    return acc, wp, wr, f1


def test_metric_oracle_1000_matrices(rng):
    for _ in range(1000):
        cm = rng.integers(0, 30, size=(2, 2))
        if cm.sum() == 0:
            cm[0, 0] = 1
        got = metrics(cm)
        want = brute_force_metrics(cm)
        for key, w in zip(("accuracy", "precision", "recall", "f1"), want):
            assert abs(got[key] - w) <= 1e-12


def test_hand_case():
    m = metrics([[50, 10], [5, 35]])
    assert m["accuracy"] == pytest.approx(0.85, abs=1e-12)
    assert m["precision"] == pytest.approx(0.6 * 50 / 55 + 0.4 * 35 / 45, abs=1e-12)
    assert m["recall"] == pytest.approx(0.85, abs=1e-12)
    assert m["f1"] == pytest.approx(0.8533, abs=1e-4)


def test_single_predicted_class_balanced_truth():
    m = metrics(confusion_matrix([0, 0, 1, 1], [0, 0, 0, 0]))
    assert m["accuracy"] == 0.5 and m["recall"] == 0.5
    # predicted-positive column is empty: its precision counts as 0
    assert m["precision"] == pytest.approx(0.5 * 0.5)


def test_empty_confusion_rejected():
    with pytest.raises(ValueError):
        metrics(np.zeros((2, 2)))


def test_confusion_orientation():
    cm = confusion_matrix([1, 1, 0], [0, 1, 0])
    assert cm.tolist() == [[1, 0], [1, 1]]


def test_normalized_confusion_orders():
    a = np.array([[9, 1], [0, 0]])
    b = np.array([[1, 1], [2, 2]])
    np.testing.assert_allclose(normalize_rows(a), [[0.9, 0.1], [0, 0]])
    np.testing.assert_allclose(normalized_confusion([a, b]), [[0.7, 0.3], [0.25, 0.25]])
    np.testing.assert_allclose(normalized_confusion([a, b], "average-normalize"), [[10 / 12, 2 / 12], [0.5, 0.5]])
    with pytest.raises(ValueError):
        normalized_confusion([a], "sideways")


def test_stratification_968_records_164_positives():
    y = np.zeros(968, dtype=int)
    y[np.random.default_rng(0).permutation(968)[:164]] = 1
    assert round(804 / 164, 2) == 4.90
    for seed in range(5):
        folds = stratified_folds(y, 10, seed)
        counts = [int(y[f].sum()) for f in folds.folds]
        assert set(counts) <= {16, 17}
        assert sorted(len(f) for f in folds.folds)[-1] - sorted(len(f) for f in folds.folds)[0] <= 1


@given(st.lists(st.integers(0, 1), min_size=10, max_size=200), st.integers(2, 10), st.integers(0, 2**31))
@settings(max_examples=100, deadline=None)
def test_folds_partition_records(labels, k, seed):
    y = np.array(labels)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        folds = stratified_folds(y, k, seed)
    allrows = np.sort(np.concatenate(folds.folds))
    np.testing.assert_array_equal(allrows, np.arange(len(y)))
    if min(y.sum(), len(y) - y.sum()) >= k:
        pos = [int(y[f].sum()) for f in folds.folds]
        assert max(pos) - min(pos) <= 1
    for f in range(k):
        assert len(np.intersect1d(folds.train_rows(f), folds.folds[f])) == 0


def test_folds_fall_back_with_warning():
    y = np.array([1, 1] + [0] * 20)
    with pytest.warns(RuntimeWarning, match="plain k-fold"):
        stratified_folds(y, 5, 0)
    with pytest.raises(ValueError):
        stratified_folds(np.zeros(3), 5, 0)


def test_fold_seed():
    assert fold_seed(7, 3) == 4
    assert len({fold_seed(42, f) for f in range(10)}) == 10


def test_report_aggregate_and_csv(tmp_path):
    folds = [{**metrics(cm), "confusion": np.array(cm)} for cm in ([[5, 0], [0, 5]], [[4, 1], [1, 4]])]
    rep = MetricsReport("overall", folds, normalized_confusion([f["confusion"] for f in folds]))
    agg = rep.aggregate()
    assert agg["accuracy"] == {"mean": 0.9, "max": 1.0, "min": 0.8}
    rep.write_csv(tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "task,metric,mean,max,min"
    assert lines[1] == "overall,accuracy,0.9,1.0,0.8"


@pytest.fixture(scope="module")
def cv_small(small_dataset):
    return cross_validate(small_dataset, "overall", TrainConfig(epochs=10), k=4, seed=3)


def test_cross_validate_recovers_planted_signal(cv_small, small_dataset):
    acc = cv_small.report.aggregate()["accuracy"]["mean"]
    assert acc >= majority_accuracy(small_dataset.labels("overall"), cv_small.folds) + 0.05
    assert cv_small.predictions.shape == (len(small_dataset),)


def test_cross_validate_deterministic_and_worker_independent(cv_small, small_dataset):
    again = cross_validate(small_dataset, "overall", TrainConfig(epochs=10), k=4, seed=3, workers=2)
    assert again.report.to_dict() == cv_small.report.to_dict()
    for a, b in zip(again.fold_results, cv_small.fold_results):
        np.testing.assert_array_equal(a.model.params, b.model.params)


def test_fold_z_scores_use_training_rows_only(cv_small):
    for fr in cv_small.fold_results:
        for rows in fr.fit_rows.values():
            assert len(np.intersect1d(rows, fr.val_rows)) == 0


def test_cross_validate_with_missing_modalities(sparse_dataset):
    cv = cross_validate(sparse_dataset, "overall", TrainConfig(epochs=2), k=4, seed=0)
    for f in cv.report.folds:
        assert 0 <= f["accuracy"] <= 1


def test_write_predictions(tmp_path, cv_small, small_dataset):
    write_predictions(cv_small, small_dataset, tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "id,fold,label,pred,p_positive"
    assert len(lines) == len(small_dataset) + 1
    assert lines[1].startswith(small_dataset.records[0].id + ",")


def test_majority_accuracy_hand():
    folds = FoldAssignment((np.array([0, 1]), np.array([2, 3])))
    # fold 0 trains on [1, 1] -> predicts 1; fold 1 trains on [0, 1] -> tie -> 0
    assert majority_accuracy([0, 1, 1, 1], folds) == pytest.approx((0.5 + 0.0) / 2)


def test_bad_options(small_dataset):
    with pytest.raises(ValueError):
        cross_validate(small_dataset, "not_a_task")
    with pytest.raises(ValueError):
        cross_validate(small_dataset, "overall", cm_order="x")
