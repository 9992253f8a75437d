"""Selection metrics and downstream evaluators.

Downstream models are refit from scratch on the selected columns of the
training split: ordinary least squares for regression, extremely randomized
trees for classification.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import ExtraTreesClassifier

from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

RIDGE_JITTER = 1e-10


def f1_selection(selected, informative) -> tuple[float, float, float]:
    """Precision, recall and F1 of a selected index set against the true one.

    Returns all zeros when either set is empty or they do not overlap.
    """
    S = {int(i) for i in selected}
    I = {int(i) for i in informative}
    if not S or not I:
        return 0.0, 0.0, 0.0
    hit = len(S & I)
    p = hit / len(S)
    r = hit / len(I)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


# ----------------------------------------------------------------- metrics --

def _pair(y, yhat):
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1 or y.size == 0:
        raise InvalidArgumentError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    return y, yhat


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def max_error(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.max(np.abs(y - yhat)))


def r2(y, yhat) -> float:
    """Coefficient of determination; 1.0 for a perfect fit of constant y, else 0.0."""
    y, yhat = _pair(y, yhat)
    ss_res = float(((y - yhat) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def explained_variance(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    var_y = float(np.var(y))
    var_res = float(np.var(y - yhat))
    if var_y == 0.0:
        return 1.0 if var_res == 0.0 else 0.0
    return 1.0 - var_res / var_y


def accuracy(labels, predicted) -> float:
    labels = np.asarray(labels)
    predicted = np.asarray(predicted)
    if labels.shape != predicted.shape or labels.size == 0:
        raise InvalidArgumentError(f"shape mismatch: {labels.shape} vs {predicted.shape}")
    return float(np.mean(labels == predicted))


def regression_metrics(y, yhat) -> dict[str, float]:
    return {"mae": mae(y, yhat), "r2": r2(y, yhat),
            "explained_variance": explained_variance(y, yhat), "max_error": max_error(y, yhat)}


# --------------------------------------------------------------------- OLS --

@dataclass(frozen=True)
class OlsModel:
    coef: np.ndarray
    intercept: float

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.coef.size:
            raise InvalidArgumentError(f"X has shape {X.shape}, model has {self.coef.size} features")
        return X @ self.coef + self.intercept


def ols_fit(X, y) -> OlsModel:
    """Least squares with an intercept.

    Solves the centred normal equations; a rank-deficient design gets a
    ``1e-10`` ridge jitter and a warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise InvalidArgumentError(f"shape mismatch: X {X.shape}, y {y.shape}")
    xm = X.mean(axis=0)
    ym = y.mean()
    Xc = X - xm
    if X.shape[1] == 0:
        return OlsModel(np.zeros(0), float(ym))
    rank = np.linalg.matrix_rank(Xc) if X.shape[0] > 1 else 0
    if rank < X.shape[1]:
        log.warning("design has rank %d < %d columns; adding ridge jitter %g",
                    rank, X.shape[1], RIDGE_JITTER)
        G = Xc.T @ Xc + RIDGE_JITTER * np.eye(X.shape[1])
        coef = np.linalg.solve(G, Xc.T @ (y - ym))
    else:
        coef = np.linalg.lstsq(Xc, y - ym, rcond=None)[0]
    return OlsModel(coef, float(ym - xm @ coef))


# ------------------------------------------------------------- extra trees --

class ConstantClassifier:
    def __init__(self, label):
        self.label = label

    def predict(self, X):
        return np.full(np.asarray(X).shape[0], self.label)


def extra_trees_fit(X, labels, n_trees: int = 100, seed: int = 0):
    """Extremely randomized trees: fully grown, sqrt(m) candidate features per node.

    A single-class training set yields a constant classifier and a warning.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if X.ndim != 2 or labels.shape != (X.shape[0],):
        raise InvalidArgumentError(f"shape mismatch: X {X.shape}, labels {labels.shape}")
    classes = np.unique(labels)
    if classes.size < 2:
        log.warning("single-class training set; falling back to a constant classifier")
        return ConstantClassifier(classes[0])
    clf = ExtraTreesClassifier(n_estimators=n_trees, criterion="gini", max_depth=None,
                               min_samples_split=2, max_features="sqrt", bootstrap=False,
                               random_state=seed, n_jobs=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        clf.fit(X, labels)
    return clf


def downstream_score(train_X, train_y, test_X, test_y, task: str, seed: int = 0,
                     n_trees: int = 100) -> dict[str, float]:
    """Fit the task's downstream model on train columns and score it on test."""
    if task == "regression":
        model = ols_fit(train_X, train_y)
        return regression_metrics(test_y, model.predict(test_X))
    clf = extra_trees_fit(train_X, train_y, n_trees=n_trees, seed=seed)
    return {"accuracy": accuracy(test_y, clf.predict(test_X))}
