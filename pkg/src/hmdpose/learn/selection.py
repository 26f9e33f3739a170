"""Univariate mutual-information feature ranking."""
from __future__ import annotations

import numpy as np


def mutual_information(X, y, bins: int = 10) -> np.ndarray:
    """MI (nats) of each column, discretized into equal-width bins, with binary y."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y).astype(int)
    n, d = X.shape
    lo, hi = X.min(axis=0), X.max(axis=0)
    width = np.where(hi > lo, hi - lo, 1.0)
    b = np.clip(((X - lo) / width * bins).astype(int), 0, bins - 1)
    codes = b + bins * np.arange(d)
    py = np.bincount(y, minlength=2) / n
    joint = np.stack([np.bincount(codes[y == c].ravel(), minlength=bins * d) for c in (0, 1)], axis=1)
    joint = joint.reshape(d, bins, 2) / n
    px = joint.sum(axis=2, keepdims=True)
    denom = px * py[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log(joint / denom), 0.0)
    mi = terms.sum(axis=(1, 2))
    mi[hi == lo] = 0.0
    return np.maximum(mi, 0.0)


def select_k_best_mi(X, y, k: int, bins: int = 10) -> np.ndarray:
    """Ascending column indices of the k highest-MI features (ties -> lower index)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    mi = mutual_information(X, y, bins)
    if k >= mi.size:
        return np.arange(mi.size)
    top = np.argsort(-mi, kind="stable")[:k]
    return np.sort(top)
