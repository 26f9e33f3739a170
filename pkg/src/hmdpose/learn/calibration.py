"""Sigmoid (Platt) recalibration of model scores."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import CalibrationInfeasible

N_FOLDS = 3
MIN_ROWS = 6
# every class must outnumber the internal folds
MIN_PER_CLASS = N_FOLDS + 1


def fit_sigmoid(scores, y, max_iter: int = 100, tol: float = 1e-10) -> tuple[float, float]:
    """(a, b) with P(y=1 | s) = sigmoid(a * s + b), fitted to Platt's smoothed targets."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    n1 = y.sum()
    n0 = y.size - n1
    t = np.where(y == 1, (n1 + 1) / (n1 + 2), 1 / (n0 + 2))
    a, b = 0.0, float(np.log((n1 + 1) / (n0 + 1)))

    def loss(a, b):
        z = a * s + b
        return float(np.sum(np.logaddexp(0.0, z) - t * z))

    f = loss(a, b)
    for _ in range(max_iter):
        p = expit(a * s + b)
        r = p - t
        g = np.array([r @ s, r.sum()])
        if np.max(np.abs(g)) < tol:
            break
        w = p * (1 - p)
        H = np.array([[w @ (s * s), w @ s], [w @ s, w.sum()]]) + 1e-12 * np.eye(2)
        step = np.linalg.solve(H, g)
        lr = 1.0
        while lr > 1e-10:
            na, nb = a - lr * step[0], b - lr * step[1]
            nf = loss(na, nb)
            if nf <= f:
                break
            lr *= 0.5
        else:
            break
        if f - nf < tol * max(1.0, abs(f)):
            a, b, f = na, nb, nf
            break
        a, b, f = na, nb, nf
    return float(a), float(b)


def stratified_folds(y, k: int = N_FOLDS, seed: int = 0) -> np.ndarray:
    """Fold id per row with each class dealt round-robin after a seeded shuffle."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold = np.empty(y.size, dtype=int)
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        fold[idx] = np.arange(idx.size) % k
    return fold


def platt_feasible(y, k: int = N_FOLDS) -> bool:
    y = np.asarray(y)
    n1 = int(y.sum())
    return y.size >= MIN_ROWS and min(n1, y.size - n1) >= max(MIN_PER_CLASS, k + 1)


@dataclass
class CalibratedModel:
    """Base model refit on all rows plus a sigmoid on its decision score."""

    base: object
    a: float
    b: float

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.a * self.base.score(X) + self.b)


def fallback_model(model):
    if getattr(model, "has_decision_function", False):
        return CalibratedModel(model, 1.0, 0.0)
    return model


def platt_calibrate(make_model, X, y, seed: int = 0, strict: bool = False):
    """Fit a sigmoid on out-of-fold scores from ``N_FOLDS`` internal folds.

    ``make_model`` builds a fresh unfitted model.  When the rows are too few
    for the internal folds the fallback is the plain logistic map of the
    decision function (a=1, b=0) for models that have one and the model's own
    probability otherwise, with a warning (or ``CalibrationInfeasible`` when
    ``strict``).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not platt_feasible(y):
        msg = f"too few rows for {N_FOLDS}-fold sigmoid calibration (n={y.size}, positives={int(y.sum())})"
        if strict:
            raise CalibrationInfeasible(msg)
        warnings.warn(msg + "; using uncalibrated scores", stacklevel=2)
        return fallback_model(make_model().fit(X, y))
    fold = stratified_folds(y, N_FOLDS, seed)
    oof = np.empty(y.size)
    for f in range(N_FOLDS):
        tr, te = fold != f, fold == f
        oof[te] = make_model().fit(X[tr], y[tr]).score(X[te])
    a, b = fit_sigmoid(oof, y)
    return CalibratedModel(make_model().fit(X, y), a, b)
