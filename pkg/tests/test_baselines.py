import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relapsegan.baselines import (
    HarnessConfig,
    HarnessRow,
    bag_of_words,
    compare_harness,
    compute_metrics,
    f1_score,
    hinge_loss,
    knn_predict,
    knn_predict_many,
    linsvm_train,
    logreg_train,
    select_k,
    table_layout,
    write_harness_csv,
)
from relapsegan.corpus import Label

R, A = Label.RELAPSED, Label.ABSTINENT


def blobs(seed=0, n=40, d=6, gap=3.0):
    rng = np.random.default_rng(seed)
    y = np.array([1] * (n // 2) + [0] * (n - n // 2))
    X = rng.normal(size=(n, d))
    X[y == 1, 0] += gap
    return X, y


# --- metrics ---------------------------------------------------------------------


def test_perfect_predictions():
    m = compute_metrics([R, A], [R, A])
    assert (m.tp, m.tn, m.fp, m.fn) == (1, 1, 0, 0)
    assert (m.precision, m.recall, m.accuracy, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_all_negative_on_all_positive():
    m = compute_metrics([A, A, A], [R, R, R])
    assert (m.precision, m.recall, m.f1, m.accuracy) == (0.0, 0.0, 0.0, 0.0)


def test_class_indices_are_accepted():
    assert compute_metrics([0, 1, 0], [0, 0, 1]) == compute_metrics([R, A, R], [R, R, A])


def test_f1_from_reported_precision_and_recall():
    assert f1_score(0.9346, 0.9429) == pytest.approx(0.9388, abs=1e-4)


def test_metric_errors():
    with pytest.raises(ValueError):
        compute_metrics([R], [R, A])
    with pytest.raises(ValueError):
        compute_metrics([], [])
    with pytest.raises(ValueError):
        compute_metrics([Label.UNLABELED], [R])


@settings(max_examples=200)
@given(st.lists(st.tuples(st.sampled_from([0, 1]), st.sampled_from([0, 1])), min_size=1, max_size=60))
def test_metric_identities(pairs):
    pred, truth = zip(*pairs)
    m = compute_metrics(pred, truth)
    assert m.tp + m.tn + m.fp + m.fn == len(pairs)
    assert m.accuracy == sum(p == t for p, t in pairs) / len(pairs)
    assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12
    if m.precision == m.recall:
        assert m.f1 == pytest.approx(m.precision)


# --- logistic regression -------------------------------------------------------------


def test_logreg_separates_two_points():
    model = logreg_train(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1, 0]), epochs=500)
    assert model.predict(np.array([[0.0, 1.0], [1.0, 0.0]])).tolist() == [1, 0]


def test_logreg_without_signal_is_undecided():
    X = np.ones((10, 3))
    y = np.array([1, 0] * 5)
    p = logreg_train(X, y, epochs=500).predict_proba(X)
    assert np.all(np.abs(p - 0.5) <= 0.05)


def test_logreg_heavy_penalty_falls_back_to_prior():
    X, y = blobs(n=30)
    y[:8] = 1
    y[8:] = 0
    model = logreg_train(X, y, lr=0.005, epochs=20000, l2=100.0)
    assert np.linalg.norm(model.weights) < 0.01
    assert model.predict_proba(X[:1])[0] == pytest.approx(8 / 30, abs=0.02)


def test_logreg_is_deterministic_and_accurate():
    X, y = blobs(1)
    a = logreg_train(X, y, seed=3)
    b = logreg_train(X, y, seed=3)
    assert np.array_equal(a.weights, b.weights)
    assert np.mean(a.predict(X) == y) >= 0.9


def test_single_class_rejected():
    with pytest.raises(ValueError):
        logreg_train(np.zeros((3, 2)), np.ones(3, int))
    with pytest.raises(ValueError):
        linsvm_train(np.zeros((3, 2)), np.zeros(3, int))


# --- linear svm ---------------------------------------------------------------------


def test_svm_zero_hinge_on_separable_set():
    X = np.array([[2.0, 0.0], [3.0, 1.0], [-2.0, 0.0], [-3.0, -1.0]])
    y = np.array([1, 1, 0, 0])
    model = linsvm_train(X, y, epochs=3000)
    assert hinge_loss(model, X, y) == pytest.approx(0.0, abs=1e-9)


def test_svm_without_loss_term_collapses():
    X, y = blobs(2)
    model = linsvm_train(X, y, c=0.0, epochs=3000)
    assert np.linalg.norm(model.weights) < 1e-6


def test_svm_label_flip_flips_decision():
    X, y = blobs(3)
    a = linsvm_train(X, y)
    b = linsvm_train(X, 1 - y)
    assert np.all(np.sign(a.decision(X)) == -np.sign(b.decision(X)))


# --- knn -----------------------------------------------------------------------------


def test_knn_exact_match():
    X = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 1.0]])
    y = np.array([1, 0, 0])
    assert knn_predict(X, y, [5.0, 5.0], k=1) is A
    assert knn_predict(X, y, [0.0, 0.0], k=1) is R


def test_knn_global_majority_when_k_is_everything():
    X = np.arange(10.0).reshape(5, 2)
    y = np.array([0, 0, 0, 1, 1])
    assert knn_predict(X, y, [100.0, 100.0], k=5) is A


def test_knn_three_point_hand_case():
    X = np.array([[0.0], [2.0], [3.5]])
    y = np.array([1, 0, 0])
    # distances from 1.2 are 1.2, 0.8, 2.3
    assert knn_predict(X, y, [1.2], k=1) is A
    assert knn_predict(X, y, [1.2], k=2) is R  # one vote each: tie goes to relapsed
    assert knn_predict(X, y, [1.2], k=3) is A


def test_knn_distance_tie_prefers_earlier_index():
    X = np.array([[1.0], [-1.0]])
    assert knn_predict(X, np.array([0, 1]), [0.0], k=1) is A
    assert knn_predict(X, np.array([1, 0]), [0.0], k=1) is R


def test_knn_errors():
    with pytest.raises(ValueError):
        knn_predict(np.zeros((0, 2)), np.zeros(0, int), [0, 0])
    with pytest.raises(ValueError):
        knn_predict(np.zeros((2, 2)), np.array([0, 1]), [0, 0], k=3)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 3, 5]))
def test_knn_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(15, 3))
    y = rng.integers(0, 2, 15)
    q = rng.normal(size=3)
    perm = rng.permutation(15)
    assert knn_predict(X, y, q, k) is knn_predict(X[perm], y[perm], q, k)


def test_batched_knn_matches_single():
    X, y = blobs(4, n=30)
    Q = np.random.default_rng(5).normal(size=(12, 6))
    single = [1 if knn_predict(X, y, q, 3) is R else 0 for q in Q]
    assert knn_predict_many(X, y, Q, 3).tolist() == single


def test_select_k():
    X, y = blobs(6, n=40)
    k = select_k(X, y)
    assert k in (1, 3, 5, 7)


# --- bag of words and harness -------------------------------------------------------


def test_bag_of_words():
    X, vocab = bag_of_words([["a", "b", "a"], ["c"]])
    assert vocab == ["a", "b", "c"]
    assert X.tolist() == [[2, 1, 0], [0, 0, 1]]
    X2, _ = bag_of_words([["a", "zzz"]], vocab)
    assert X2.tolist() == [[1, 0, 0]]


def test_harness_on_small_data():
    rng = np.random.default_rng(0)
    classes = np.array([0] * 20 + [1] * 10)
    images = rng.uniform(0, 0.2, size=(30, 2, 10, 10))
    images[classes == 0, 0, :, 4] += 0.6
    cfg = HarnessConfig(gan_epochs=2, batch_size=8, logreg_epochs=200, svm_epochs=200)
    rows = compare_harness(images, classes, [0.8, 0.5], [0], cfg)
    assert {(r.method, r.fraction) for r in rows} == {(m, f) for m in ("LogReg", "SVM", "KNN", "GAN") for f in (0.8, 0.5)}
    again = compare_harness(images, classes, [0.8, 0.5], [0], cfg)
    buf_a, buf_b = io.StringIO(), io.StringIO()
    write_harness_csv(rows, buf_a)
    write_harness_csv(again, buf_b)
    assert buf_a.getvalue() == buf_b.getvalue()
    assert buf_a.getvalue().splitlines()[0] == "method,fraction,seed,acc,f1"
    assert all(1 <= r.extra["epoch"] <= 2 for r in rows if r.method == "GAN")
    with pytest.raises(ValueError):
        compare_harness(images, classes, [1.0], [0], cfg)


def test_table_layout_shape():
    rows = [HarnessRow(m, f, 0, 0.5, 0.5) for m in ("LogReg", "SVM", "KNN", "GAN") for f in (0.9, 0.8, 0.7, 0.6, 0.5)]
    table = table_layout(rows)
    assert table[0] == ["method", "metric", "seed", "90%", "80%", "70%", "60%", "50%"]
    assert len(table) == 1 + 4 * 2
    assert all(len(r) == 8 for r in table)
