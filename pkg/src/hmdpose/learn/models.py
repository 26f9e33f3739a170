"""Binary classifiers behind one small interface.

Every model exposes ``fit(X, y)``, ``predict_proba(X)`` returning the
positive-class probability as a 1-D array, ``score(X)`` (the raw decision
value used for Platt scaling), ``params()`` and flat-array persistence via
``arrays()`` / ``from_arrays``.  Adding a model family means registering a
class with that surface in ``MODEL_REGISTRY``.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit


class ConvergenceWarning(UserWarning):
    pass


class LogisticRegression:
    """L2-penalized logistic regression solved by damped Newton iterations.

    Minimizes 0.5 * ||w||^2 + C * sum_i s_i * logloss_i with an unpenalized
    intercept; s_i are the class weights (``"balanced"`` gives N / (2 n_c)).
    Columns that are identically zero keep an exact zero weight.
    """

    name = "LogReg"
    has_decision_function = True

    def __init__(self, C: float = 1.0, class_weight: str | None = None, max_iter: int = 1000,
                 tol: float = 1e-6, penalty: str = "l2"):
        if penalty != "l2":
            raise ValueError("only the l2 penalty is supported")
        self.C = float(C)
        self.class_weight = class_weight
        self.max_iter = int(max_iter)
        self.tol = float(tol)
        self.penalty = penalty
        self.coef_: np.ndarray | None = None
        self.intercept_ = 0.0
        self.converged_ = False
        self.n_iter_ = 0

    def params(self) -> dict:
        return {"C": self.C, "class_weight": self.class_weight, "max_iter": self.max_iter,
                "tol": self.tol, "penalty": self.penalty}

    def _weights(self, y: np.ndarray) -> np.ndarray:
        if self.class_weight is None:
            return np.ones(y.size)
        if self.class_weight != "balanced":
            raise ValueError(f"unknown class_weight {self.class_weight!r}")
        n1 = y.sum()
        n0 = y.size - n1
        return np.where(y == 1, y.size / (2.0 * n1), y.size / (2.0 * n0))

    def objective(self, X, y, w, b) -> float:
        z = X @ w + b
        s = self._weights(y)
        return float(0.5 * w @ w + self.C * np.sum(s * (np.logaddexp(0.0, z) - y * z)))

    def gradient(self, X, y, w, b) -> np.ndarray:
        s = self._weights(y)
        r = self.C * s * (expit(X @ w + b) - y)
        return np.concatenate([w + X.T @ r, [r.sum()]])

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if not (0 < y.sum() < y.size):
            raise ValueError("logistic regression needs both classes")
        active = np.flatnonzero(np.any(X != 0, axis=0))
        Xa = X[:, active]
        s = self._weights(y)
        d = active.size
        theta = np.zeros(d + 1)
        prior = np.sum(s * y) / np.sum(s)
        theta[-1] = np.log(prior / (1 - prior))

        def f(th):
            z = Xa @ th[:-1] + th[-1]
            return 0.5 * th[:-1] @ th[:-1] + self.C * np.sum(s * (np.logaddexp(0.0, z) - y * z))

        fval = f(theta)
        self.converged_ = False
        for it in range(1, self.max_iter + 1):
            z = Xa @ theta[:-1] + theta[-1]
            p = expit(z)
            r = self.C * s * (p - y)
            grad = np.concatenate([theta[:-1] + Xa.T @ r, [r.sum()]])
            if np.max(np.abs(grad)) < self.tol:
                self.converged_ = True
                break
            h = self.C * s * p * (1 - p)
            H = np.empty((d + 1, d + 1))
            H[:d, :d] = (Xa.T * h) @ Xa
            H[:d, :d][np.diag_indices(d)] += 1.0
            H[:d, d] = H[d, :d] = Xa.T @ h
            H[d, d] = h.sum() + 1e-12
            try:
                step = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, grad, rcond=None)[0]
            t, slope = 1.0, grad @ step
            while True:
                cand = theta - t * step
                fc = f(cand)
                if fc <= fval - 1e-4 * t * slope or t < 1e-10:
                    break
                t *= 0.5
            theta, fval = cand, fc
        self.n_iter_ = it
        if not self.converged_:
            warnings.warn(f"logistic regression did not reach gradient tolerance in {self.max_iter} "
                          "iterations", ConvergenceWarning, stacklevel=2)
        self.coef_ = np.zeros(X.shape[1])
        self.coef_[active] = theta[:-1]
        self.intercept_ = float(theta[-1])
        return self

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_

    score = decision_function

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"coef": self.coef_, "intercept": np.array([self.intercept_])}

    @classmethod
    def from_arrays(cls, params: dict, arrays: dict) -> "LogisticRegression":
        m = cls(**params)
        m.coef_ = np.asarray(arrays["coef"], dtype=float)
        m.intercept_ = float(arrays["intercept"][0])
        m.converged_ = True
        return m


class KNN:
    """k-nearest-neighbour vote under the Minkowski-p distance.

    Distance ties resolve by training row order.
    """

    name = "KNN"
    has_decision_function = False

    def __init__(self, k: int = 5, p: float = 2, weights: str = "uniform"):
        if weights not in ("uniform", "distance"):
            raise ValueError(f"unknown weights {weights!r}")
        self.k = int(k)
        self.p = p
        self.weights = weights
        self.X_: np.ndarray | None = None
        self.y_: np.ndarray | None = None

    def params(self) -> dict:
        return {"k": self.k, "p": self.p, "weights": self.weights}

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.shape[0] < self.k:
            raise ValueError(f"KNN with k={self.k} needs at least {self.k} training rows")
        self.X_ = X
        self.y_ = np.asarray(y, dtype=float)
        return self

    def _distances(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.p == 2:
            return cdist(X, self.X_, "euclidean")
        return cdist(X, self.X_, "minkowski", p=self.p)

    def predict_proba(self, X) -> np.ndarray:
        D = self._distances(X)
        nn = np.argsort(D, axis=1, kind="stable")[:, :self.k]
        votes = self.y_[nn]
        if self.weights == "uniform":
            return votes.mean(axis=1)
        dist = np.take_along_axis(D, nn, axis=1)
        exact = dist == 0
        w = np.where(exact.any(axis=1, keepdims=True), exact.astype(float), 1.0 / np.where(exact, 1.0, dist))
        return (w * votes).sum(axis=1) / w.sum(axis=1)

    score = predict_proba

    def arrays(self) -> dict[str, np.ndarray]:
        return {"X": self.X_, "y": self.y_}

    @classmethod
    def from_arrays(cls, params: dict, arrays: dict) -> "KNN":
        m = cls(**params)
        m.X_ = np.asarray(arrays["X"], dtype=float)
        m.y_ = np.asarray(arrays["y"], dtype=float)
        return m


class DecisionTree:
    """CART tree with Gini splits, stored as flat node arrays.

    ``feature[i] < 0`` marks a leaf; ``value[i]`` is the positive fraction of
    the training rows that reached node i.
    """

    def __init__(self, max_depth: int | None = None, max_features: int | str | None = None,
                 min_samples_split: int = 2, min_samples_leaf: int = 1):
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf

    def _n_features(self, d: int) -> int:
        mf = self.max_features
        if mf is None:
            return d
        if mf == "sqrt":
            return max(1, int(np.sqrt(d)))
        if mf == "log2":
            return max(1, int(np.log2(d)))
        return max(1, min(d, int(mf)))

    def _best_split(self, xs: np.ndarray, ys: np.ndarray):
        order = np.argsort(xs, kind="stable")
        xs, ys = xs[order], ys[order]
        n = xs.size
        pos_left = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n)
        n_right = n - n_left
        pos_right = ys.sum() - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        impurity = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
        valid = (xs[:-1] < xs[1:]) & (n_left >= self.min_samples_leaf) & (n_right >= self.min_samples_leaf)
        if not valid.any():
            return None
        impurity = np.where(valid, impurity, np.inf)
        i = int(np.argmin(impurity))
        thr = 0.5 * (xs[i] + xs[i + 1])
        if not xs[i] <= thr < xs[i + 1]:
            thr = xs[i]
        return float(impurity[i]), float(thr)

    def fit(self, X, y, rng: np.random.Generator | None = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = rng or np.random.default_rng(0)
        d = X.shape[1]
        n_try = self._n_features(d)
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(idx):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(y[idx].mean()))
            return len(feature) - 1

        root = new_node(np.arange(X.shape[0]))
        stack = [(root, np.arange(X.shape[0]), 0)]
        while stack:
            node, idx, depth = stack.pop()
            ys = y[idx]
            frac = ys.mean()
            if (frac == 0 or frac == 1 or idx.size < self.min_samples_split
                    or (self.max_depth is not None and depth >= self.max_depth)):
                continue
            parent = 2 * frac * (1 - frac)
            best = None
            tried = 0
            for f in rng.permutation(d):
                if tried >= n_try:
                    break
                xs = X[idx, f]
                if xs.min() == xs.max():
                    continue
                tried += 1
                res = self._best_split(xs, ys)
                if res is not None and (best is None or res[0] < best[0]):
                    best = (res[0], res[1], int(f))
            if best is None or best[0] > parent:
                continue
            _, thr, f = best
            go_left = X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = f, thr
            left[node] = new_node(li)
            right[node] = new_node(ri)
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))
        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.value_ = np.array(value)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature_[node]
            inner = f >= 0
            if not inner.any():
                return self.value_[node]
            r = rows[inner]
            go_left = X[r, f[inner]] <= self.threshold_[node[inner]]
            node[r] = np.where(go_left, self.left_[node[r]], self.right_[node[r]])


class BaggedTrees:
    """Bootstrap ensemble of Gini CART trees; probability is the mean leaf frequency."""

    name = "Trees"
    has_decision_function = False

    def __init__(self, n_trees: int = 100, max_depth: int | None = None, max_features="sqrt",
                 min_samples_split: int = 2, min_samples_leaf: int = 1, bootstrap: bool = True,
                 seed: int = 42):
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.seed = seed
        self.trees_: list[DecisionTree] = []

    def params(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth, "max_features": self.max_features,
                "min_samples_split": self.min_samples_split, "min_samples_leaf": self.min_samples_leaf,
                "bootstrap": self.bootstrap, "seed": self.seed}

    def _tree(self) -> DecisionTree:
        return DecisionTree(self.max_depth, self.max_features, self.min_samples_split, self.min_samples_leaf)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = X.shape[0]
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_trees):
            rng = np.random.default_rng(child)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            self.trees_.append(self._tree().fit(X[idx], y[idx], rng))
        return self

    def tree_probabilities(self, X) -> np.ndarray:
        return np.stack([t.predict_proba(X) for t in self.trees_])

    def predict_proba(self, X) -> np.ndarray:
        return self.tree_probabilities(X).mean(axis=0)

    score = predict_proba

    def arrays(self) -> dict[str, np.ndarray]:
        sizes = np.array([t.feature_.size for t in self.trees_], dtype=np.int64)
        cat = lambda attr: np.concatenate([getattr(t, attr) for t in self.trees_])  # noqa: E731
        return {"sizes": sizes, "feature": cat("feature_"), "threshold": cat("threshold_"),
                "left": cat("left_"), "right": cat("right_"), "value": cat("value_")}

    @classmethod
    def from_arrays(cls, params: dict, arrays: dict) -> "BaggedTrees":
        m = cls(**params)
        offsets = np.concatenate([[0], np.cumsum(arrays["sizes"])])
        for a, b in zip(offsets[:-1], offsets[1:]):
            t = m._tree()
            t.feature_ = np.asarray(arrays["feature"][a:b], dtype=np.int64)
            t.threshold_ = np.asarray(arrays["threshold"][a:b], dtype=float)
            t.left_ = np.asarray(arrays["left"][a:b], dtype=np.int64)
            t.right_ = np.asarray(arrays["right"][a:b], dtype=np.int64)
            t.value_ = np.asarray(arrays["value"][a:b], dtype=float)
            m.trees_.append(t)
        return m


MODEL_REGISTRY = {
    "logreg": LogisticRegression,
    "knn": KNN,
    "trees": BaggedTrees,
}


def make_model(kind: str, **params):
    try:
        cls = MODEL_REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_REGISTRY)}") from None
    return cls(**params)


def fit_logreg(X, y, C: float = 1.0, class_weight: str | None = None, **kw) -> LogisticRegression:
    return LogisticRegression(C=C, class_weight=class_weight, **kw).fit(X, y)


def fit_knn(X, y, k: int = 5, p: float = 2, weights: str = "uniform") -> KNN:
    return KNN(k, p, weights).fit(X, y)


def fit_bagged_trees(X, y, n_trees: int = 100, max_depth: int | None = None, feature_subsample="sqrt",
                     seed: int = 42, **kw) -> BaggedTrees:
    return BaggedTrees(n_trees, max_depth, feature_subsample, seed=seed, **kw).fit(X, y)
