import logging

import numpy as np
import pytest

from topkfs.data import make_blobs, split
from topkfs.errors import InvalidArgumentError
from topkfs.evaluate import (ConstantClassifier, accuracy, downstream_score, explained_variance, extra_trees_fit,
                             f1_selection, mae, max_error, ols_fit, r2)


def test_f1_examples():
    S = list(range(27))
    I = list(range(3, 30))
    p, r, f = f1_selection(S, I)
    assert p == pytest.approx(24 / 27) and r == pytest.approx(24 / 27) and f == pytest.approx(24 / 27)
    assert f1_selection([1, 2], [1, 2]) == (1.0, 1.0, 1.0)
    assert f1_selection([1, 2], [3]) == (0.0, 0.0, 0.0)
    assert f1_selection([], [3]) == (0.0, 0.0, 0.0)


def test_metrics_on_exact_fit():
    y = np.array([1.0, 2.0, 4.0])
    assert mae(y, y) == 0.0 and max_error(y, y) == 0.0 and r2(y, y) == 1.0
    assert explained_variance(y, y) == 1.0
    assert r2(y, np.full(3, y.mean())) == pytest.approx(0.0)
    with pytest.raises(InvalidArgumentError):
        mae(y, y[:2])


def test_ols_exact_linear_data():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 4))
    y = X @ np.array([1.0, -2.0, 0.5, 3.0]) + 1.5
    model = ols_fit(X, y)
    yhat = model.predict(X)
    assert mae(y, yhat) < 1e-8 and r2(y, yhat) > 1 - 1e-8
    assert model.intercept == pytest.approx(1.5)


def test_ols_residuals_orthogonal():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 3))
    y = rng.standard_normal(40)
    res = y - ols_fit(X, y).predict(X)
    assert np.all(np.abs(X.T @ res) < 1e-8) and abs(res.sum()) < 1e-8


def test_ols_rank_deficient_warns(caplog):
    X = np.column_stack([np.arange(5.0), np.arange(5.0)])
    with caplog.at_level(logging.WARNING):
        model = ols_fit(X, 2 * np.arange(5.0))
    assert "rank" in caplog.text
    assert np.allclose(model.predict(X), 2 * np.arange(5.0), atol=1e-6)


def test_extra_trees_separable_blobs():
    d = make_blobs(400, 2, sep=6.0, seed=0)
    tr, te = split(d, 0.5, seed=0)
    clf = extra_trees_fit(tr.X, tr.y, n_trees=100, seed=0)
    assert accuracy(te.y, clf.predict(te.X)) >= 0.95
    # fully grown trees reproduce training labels
    assert accuracy(tr.y, clf.predict(tr.X)) == 1.0


def test_extra_trees_seeded_and_single_class():
    d = make_blobs(100, 3, sep=1.0, seed=1)
    a = extra_trees_fit(d.X, d.y, 20, seed=3).predict(d.X + 0.5)
    b = extra_trees_fit(d.X, d.y, 20, seed=3).predict(d.X + 0.5)
    assert np.array_equal(a, b)
    clf = extra_trees_fit(d.X, np.zeros(100, dtype=int))
    assert isinstance(clf, ConstantClassifier) and not clf.predict(d.X).any()


def test_downstream_score_dispatch():
    d = make_blobs(100, 2, seed=2)
    out = downstream_score(d.X, d.y, d.X, d.y, "binary", n_trees=10)
    assert set(out) == {"accuracy"}
    out = downstream_score(d.X, d.X[:, 0], d.X, d.X[:, 0], "regression")
    assert set(out) == {"mae", "r2", "explained_variance", "max_error"}
    assert accuracy(d.y, d.y) == 1.0
