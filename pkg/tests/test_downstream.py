import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, pair_count_auc
from qfsurrogate.downstream import (
    Classifier,
    ClassifierError,
    binary_auc,
    evaluate,
    load_classifier,
    logistic_loss_grad,
    multiclass_auc,
    save_classifier,
    train_classifier,
)


def blobs(seed=0, n=40, sep=3.0, C=2):
    rng = np.random.default_rng(seed)
    centers = sep * np.stack([np.cos(2 * np.pi * np.arange(C) / C),
                              np.sin(2 * np.pi * np.arange(C) / C)], axis=1)
    X = np.concatenate([c + 0.5 * rng.normal(size=(n, 2)) for c in centers])
    y = np.repeat(np.arange(C), n)
    return X, y


def test_separable_blobs_fit_perfectly():
    X, y = blobs()
    clf = train_classifier(X, y)
    assert np.mean(clf.predict(X) == y) == 1.0


def test_nearest_centroid_bisector():
    X = np.array([[-2.0, 0.0], [-2.0, 1.0], [-2.0, -1.0], [2.0, 0.0], [2.0, 1.0], [2.0, -1.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    clf = train_classifier(X, y, kind="nearest-centroid")
    # centroids (-2, 0) and (2, 0): the boundary is the line x = 0
    probes = np.array([[-0.01, 5.0], [0.01, -5.0], [-3.0, 0.0], [0.5, 100.0]])
    np.testing.assert_array_equal(clf.predict(probes), [0, 1, 0, 1])
    s = clf.scores([[0.0, 7.0]])[0]
    assert s[0] == pytest.approx(s[1])


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 3))
    Y = np.eye(3)[rng.integers(0, 3, 12)]
    W, b, reg = rng.normal(size=(3, 3)), rng.normal(size=3), 0.01
    _, gW, gb = logistic_loss_grad(W, b, X, Y, reg)
    nW = central_difference(lambda w: logistic_loss_grad(w, b, X, Y, reg)[0], W)
    nb = central_difference(lambda v: logistic_loss_grad(W, v, X, Y, reg)[0], b)
    assert np.abs(gW - nW).max() <= 1e-6
    assert np.abs(gb - nb).max() <= 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 4))
def test_loss_never_increases(seed, C):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, C, 30)
    y[:C] = np.arange(C)
    clf = train_classifier(X, y, seed=seed, max_iter=300, step=5.0)
    losses = np.array(clf.losses)
    assert np.all(np.diff(losses) <= 0.0)


def test_training_deterministic():
    X, y = blobs(2, C=3)
    a, b = train_classifier(X, y, seed=4), train_classifier(X, y, seed=4)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_single_class_rejected():
    with pytest.raises(ClassifierError, match="two classes"):
        train_classifier(np.zeros((4, 2)), np.zeros(4, dtype=int))


def test_non_finite_rejected():
    with pytest.raises(ClassifierError):
        train_classifier([[np.nan], [1.0]], [0, 1])


# -- metrics --------------------------------------------------------------------------


def test_auc_hand_built_list():
    scores = [0.9, 0.8, 0.7, 0.7, 0.4, 0.2]
    pos = [True, False, True, False, True, False]
    # pairs won by positives: 0.9 beats 3, 0.7 beats 0.2 and ties 0.7, 0.4 beats 0.2
    expected = (3 + 1 + 0.5 + 1) / 9
    assert binary_auc(scores, pos) == pytest.approx(expected)
    assert pair_count_auc(scores, pos) == pytest.approx(expected)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.booleans()), min_size=2, max_size=40))
def test_auc_matches_pair_counting(data):
    scores = [float(s) for s, _ in data]
    pos = [p for _, p in data]
    if all(pos) or not any(pos):
        assert np.isnan(binary_auc(scores, pos))
        return
    assert binary_auc(scores, pos) == pytest.approx(pair_count_auc(scores, pos), abs=1e-12)
    # strictly monotone transform leaves the ranks alone
    assert binary_auc(np.exp(np.array(scores)), pos) == pytest.approx(binary_auc(scores, pos))


def test_random_scores_give_half():
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 5000)
    assert abs(binary_auc(rng.uniform(size=y.size), y == 1) - 0.5) <= 0.05


def test_multiclass_auc_is_macro_average():
    rng = np.random.default_rng(2)
    S = rng.uniform(size=(30, 3))
    y = np.arange(30) % 3
    expected = np.mean([pair_count_auc(S[:, k], y == k) for k in range(3)])
    assert multiclass_auc(S, y, np.arange(3)) == pytest.approx(expected)


def test_perfect_predictor():
    X, y = blobs(3, sep=6.0)
    clf = train_classifier(X, y)
    rep = evaluate(clf, X, y)
    assert rep.accuracy == 1.0 and rep.auc == 1.0
    assert rep.precision == {0: 1.0, 1: 1.0}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_report_invariants_and_permutation(seed):
    X, y = blobs(seed % 50, sep=1.0, C=3)
    clf = train_classifier(X, y, max_iter=200)
    rep = evaluate(clf, X, y)
    np.testing.assert_array_equal(rep.confusion.sum(axis=1), np.bincount(y))
    assert rep.accuracy == pytest.approx(np.trace(rep.confusion) / y.size)
    perm = np.random.default_rng(seed).permutation(y.size)
    other = evaluate(clf, X[perm], y[perm])
    assert other.accuracy == rep.accuracy
    assert other.auc == pytest.approx(rep.auc, abs=1e-12)
    np.testing.assert_array_equal(other.confusion, rep.confusion)


def test_unseen_class_rejected():
    X, y = blobs()
    clf = train_classifier(X, y)
    with pytest.raises(ClassifierError, match="unseen"):
        evaluate(clf, X[:3], [0, 1, 5])


def test_report_text_mentions_every_class():
    X, y = blobs(4, C=3)
    text = evaluate(train_classifier(X, y), X, y).to_text()
    assert text.startswith("accuracy")
    assert all(f"    {c}" in text for c in range(3))


@pytest.mark.parametrize("kind", ["multinomial-logistic", "nearest-centroid"])
def test_classifier_roundtrip(tmp_path, kind):
    X, y = blobs(5, C=3)
    clf = train_classifier(X, y, kind=kind)
    save_classifier(clf, tmp_path / "c.json")
    back = load_classifier(tmp_path / "c.json")
    assert isinstance(back, Classifier)
    np.testing.assert_array_equal(back.scores(X), clf.scores(X))
