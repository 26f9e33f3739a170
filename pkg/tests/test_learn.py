import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import optimize, stats

import oracles
from hmdpose.errors import CalibrationInfeasible
from hmdpose.learn.calibration import CalibratedModel, fit_sigmoid, platt_calibrate, platt_feasible
from hmdpose.learn.models import KNN, BaggedTrees, DecisionTree, LogisticRegression, make_model
from hmdpose.learn.pipeline import (
    PipelineSpec, expand_grid, fit_pipeline, grid_search, load_bundle, save_bundle,
)
from hmdpose.learn.scalers import fit_scaler, yeo_johnson
from hmdpose.learn.selection import mutual_information, select_k_best_mi

columns = arrays(np.float64, st.integers(3, 40), elements=st.integers(-10**5, 10**5).map(lambda v: v / 100))


# ---------------------------------------------------------------- scalers

def test_scaler_examples():
    z = fit_scaler("standard", np.array([[1.0], [2.0], [3.0]])).transform(np.array([[1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(z[:, 0], [-1.224744871, 0, 1.224744871], atol=1e-9)
    X = np.array([[2.0], [2.0], [2.0]])
    assert not fit_scaler("minmax", X).transform(X).any()
    R = np.array([[1.0], [2], [3], [4], [100]])
    np.testing.assert_allclose(fit_scaler("robust", R).transform(R)[:, 0], [-1, -0.5, 0, 0.5, 48.5])


@given(columns, st.sampled_from(["standard", "minmax", "robust"]))
def test_scalers_match_oracle(col, kind):
    X = col[:, None]
    got = fit_scaler(kind, X).transform(X)[:, 0]
    if np.ptp(col) == 0:
        assert not got.any()
        return
    ref = {"standard": oracles.standard_column, "minmax": oracles.minmax_column,
           "robust": oracles.robust_column}[kind]
    if kind == "robust" and oracles.quantile(col.tolist(), 0.75) == oracles.quantile(col.tolist(), 0.25):
        return
    np.testing.assert_allclose(got, ref(col.tolist()), rtol=1e-9, atol=1e-9)


@given(st.floats(-50, 50), st.floats(-3, 3))
def test_yeo_johnson_pointwise(x, lmbda):
    got = float(yeo_johnson(np.array([x]), lmbda)[0])
    assert got == pytest.approx(oracles.yeo_johnson_value(x, lmbda), rel=1e-9, abs=1e-12)
    assert got == pytest.approx(float(stats.yeojohnson(np.array([x]), lmbda)[0]), rel=1e-6, abs=1e-12)


def test_scaler_applies_train_statistics_to_test():
    train = np.array([[0.0], [10.0]])
    sc = fit_scaler("minmax", train)
    assert sc.transform(np.array([[5.0], [20.0]]))[:, 0].tolist() == [0.5, 2.0]


# ---------------------------------------------------------------- selection

def test_mi_examples():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 400)
    X = np.column_stack([rng.normal(size=400), y.astype(float), rng.normal(size=400)])
    mi = mutual_information(X, y)
    p = y.mean()
    assert mi[1] == pytest.approx(-(p * np.log(p) + (1 - p) * np.log(1 - p)), rel=1e-12)
    assert mi[0] < 0.05 and mi[2] < 0.05
    assert select_k_best_mi(X, y, 1).tolist() == [1]
    assert select_k_best_mi(X, y, 3).tolist() == [0, 1, 2]


def test_mi_against_contingency_oracle():
    rng = np.random.default_rng(5)
    y = rng.integers(0, 2, 97)
    x = rng.normal(size=97) + y
    lo, hi = x.min(), x.max()
    b = np.clip(((x - lo) / (hi - lo) * 10).astype(int), 0, 9)
    want = 0.0
    for i in range(10):
        for c in (0, 1):
            pxy = np.mean((b == i) & (y == c))
            if pxy:
                want += pxy * np.log(pxy / (np.mean(b == i) * np.mean(y == c)))
    assert mutual_information(x, y)[0] == pytest.approx(want, rel=1e-12)


# ---------------------------------------------------------------- models

def test_logreg_matches_direct_minimization():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 4))
    y = (X @ [1.0, -2.0, 0.5, 0.0] + rng.normal(size=60) > 0).astype(float)
    for cw in (None, "balanced"):
        m = LogisticRegression(C=0.7, class_weight=cw, tol=1e-10).fit(X, y)
        res = optimize.minimize(lambda th: m.objective(X, y, th[:-1], th[-1]), np.zeros(5),
                                jac=lambda th: m.gradient(X, y, th[:-1], th[-1]), method="BFGS",
                                options={"gtol": 1e-10})
        np.testing.assert_allclose(np.append(m.coef_, m.intercept_), res.x, atol=1e-5)


def test_logreg_examples():
    X = np.array([[-1.0], [1.0]])
    m = LogisticRegression(C=1.0).fit(X, np.array([0, 1]))
    p = m.predict_proba(X)
    assert p[0] < 0.5 < p[1]
    m = LogisticRegression(C=1.0).fit(np.ones((10, 2)) * 0, np.array([1] * 3 + [0] * 7))
    assert not m.coef_.any() and m.predict_proba(np.zeros((1, 2)))[0] == pytest.approx(0.3)
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 2))
    y = np.array([1] * 20 + [0] * 180)
    X[:20] += 0.5
    bal = LogisticRegression(class_weight="balanced", tol=1e-10).fit(X, y)
    p = bal.predict_proba(X)
    # the unpenalized intercept's stationarity makes the class-weighted mean prediction exactly 0.5
    assert 0.5 * (p[y == 1].mean() + p[y == 0].mean()) == pytest.approx(0.5, abs=1e-8)
    plain = LogisticRegression(tol=1e-10).fit(X, y).predict_proba(X)
    assert plain.mean() == pytest.approx(0.1, abs=1e-8)


def test_logreg_separable_points_confident():
    X = np.array([[-10.0], [10.0]])
    p = LogisticRegression(C=1.0).fit(X, np.array([0, 1])).predict_proba(X)
    assert p[1] > 0.9 and p[0] < 0.1


def test_logreg_zero_column_keeps_zero_weight():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 3))
    X[:, 1] = 0.0
    y = (X[:, 0] > 0).astype(float)
    assert LogisticRegression().fit(X, y).coef_[1] == 0.0


def test_knn_examples():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    y = np.array([1, 1, 0, 0])
    assert KNN(k=1).fit(X, y).predict_proba(np.array([[10.0]]))[0] == 0.0
    assert KNN(k=4).fit(X, y).predict_proba(np.array([[3.0]]))[0] == 0.5
    assert KNN(k=3).fit(X, y).predict_proba(np.array([[0.5]]))[0] == pytest.approx(2 / 3)


@given(st.integers(0, 1000), st.integers(1, 7))
def test_knn_against_brute_force(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(12, 2)).astype(float)
    y = rng.integers(0, 2, 12)
    q = rng.integers(0, 5, size=(3, 2)).astype(float)
    got = KNN(k=k).fit(X, y).predict_proba(q)
    for i, row in enumerate(q):
        d = [((row - x) ** 2).sum() for x in X]
        order = sorted(range(12), key=lambda j: (d[j], j))[:k]
        assert got[i] == pytest.approx(np.mean(y[order]))


def test_tree_fits_xor():
    X = np.array([[0.0, 0], [0, 1], [1, 0], [1, 1]] * 3)
    y = np.array([0, 1, 1, 0] * 3)
    t = DecisionTree().fit(X, y)
    assert np.array_equal(t.predict_proba(X), y.astype(float))


def test_bagged_trees():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 40)
    m = BaggedTrees(n_trees=100, seed=1).fit(np.ones((40, 3)), y)
    # constant features: every tree is a root leaf holding its bootstrap prior
    assert m.predict_proba(np.ones((2, 3)))[0] == pytest.approx(y.mean(), abs=0.05)
    X = rng.normal(size=(40, 3))
    m = BaggedTrees(n_trees=7, seed=2).fit(X, y)
    explicit = sum(t.predict_proba(X) for t in m.trees_) / 7
    np.testing.assert_allclose(m.predict_proba(X), explicit)


def test_unknown_model():
    with pytest.raises(ValueError):
        make_model("svm")


# ---------------------------------------------------------------- calibration

def test_platt_on_calibrated_scores():
    rng = np.random.default_rng(4)
    logit = rng.normal(0, 2, 5000)
    y = (rng.uniform(size=5000) < 1 / (1 + np.exp(-logit))).astype(float)
    a, b = fit_sigmoid(logit, y)
    assert a == pytest.approx(1.0, abs=0.3) and abs(b) < 0.3


def test_platt_fallbacks():
    X = np.arange(10.0)[:, None]
    y = np.array([0] * 7 + [1] * 3)
    assert not platt_feasible(y)
    with pytest.warns(UserWarning):
        m = platt_calibrate(lambda: LogisticRegression(), X, y)
    assert isinstance(m, CalibratedModel) and (m.a, m.b) == (1.0, 0.0)
    with pytest.warns(UserWarning):
        k = platt_calibrate(lambda: KNN(k=3), X, y)
    assert isinstance(k, KNN)
    with pytest.raises(CalibrationInfeasible):
        platt_calibrate(lambda: LogisticRegression(), X, y, strict=True)


@given(st.integers(0, 500))
def test_calibrated_probability_monotone(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 1))
    y = (X[:, 0] + rng.normal(size=40) > 0).astype(float)
    y[:5], y[5:10] = 1, 0
    m = platt_calibrate(lambda: LogisticRegression(), X, y, seed=seed)
    grid = np.linspace(-3, 3, 50)[:, None]
    p = m.predict_proba(grid)
    assert np.all(np.diff(p) >= 0) or np.all(np.diff(p) <= 0)


# ---------------------------------------------------------------- pipeline

def _data(seed=0, n=80, d=6):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] - X[:, 1] + 0.5 * rng.normal(size=n) > 0).astype(float)
    return X, y


@pytest.mark.parametrize("spec", [
    PipelineSpec("power_yj", 3, "logreg", {"C": 0.5}, "platt", "balanced"),
    PipelineSpec("robust", None, "knn", {"k": 5}),
    PipelineSpec("minmax", 4, "trees", {"n_trees": 5, "max_depth": 3}, "platt"),
])
def test_bundle_round_trip(spec, tmp_path):
    X, y = _data()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pipe = fit_pipeline(spec, X, y, seed=3)
    back = load_bundle(save_bundle(pipe, tmp_path / "b", {"fold": 0}))
    np.testing.assert_array_equal(back.predict_proba(X), pipe.predict_proba(X))
    assert back.spec == spec


def test_missing_bundle(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_bundle(tmp_path)


def test_selected_columns_carry_weights():
    X, y = _data()
    pipe = fit_pipeline(PipelineSpec("standard", 2, "logreg"), X, y)
    w = pipe.feature_weights()
    assert set(np.flatnonzero(w)) <= set(pipe.candidate_features()) and pipe.candidate_features().size == 2


def test_grid_search_rules():
    specs = expand_grid(models={"logreg": {"C": [0.1, 1.0]}, "knn": {"k": [3]}})
    assert len(specs) == 3
    one, _ = grid_search(specs[:1], lambda s: [0.5])
    assert one == specs[0]
    strong = specs[1]
    best, table = grid_search(specs, lambda s: [0.9, 0.8] if s == strong else [0.6, 0.5])
    assert best == strong and table[strong.label] == pytest.approx(0.85)
    best, _ = grid_search(specs, lambda s: [0.1] if s == strong else [0.4], comparator="clinical_cost")
    assert best == strong
    # equal means: lexicographically smaller label wins
    best, _ = grid_search(specs, lambda s: [0.7])
    assert best == min(specs, key=lambda s: s.label)


def test_spec_validation():
    with pytest.raises(ValueError):
        PipelineSpec(calibration="isotonic")
    with pytest.raises(ValueError):
        PipelineSpec(select_k=0)
    assert PipelineSpec("standard", 20, "logreg", {"C": 1.0}).label == "Standard|MI(k=20)|LogReg(C=1,p=l2)|none"
