import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from hmdpose.decide import (
    GRID, NEVER, Constraints, Pooling, PoolingKind, ThresholdPolicy, confusion_summary, infer_profiles,
    majority_vote, pool, pool_by_subject, tune_threshold,
)

probs = st.lists(st.floats(0, 1), min_size=1, max_size=30)
KINDS = [Pooling(PoolingKind.PERCENTILE, 0.9), Pooling(PoolingKind.MAX), Pooling(PoolingKind.TOPK, k=3),
         Pooling(PoolingKind.NOISY_OR)]


@pytest.mark.parametrize("votes,want", [([1, 1, 0], 1), ([1, 0], 1), ([0, 0, 0], 0)])
def test_majority_vote(votes, want):
    assert majority_vote(votes) == want


def test_pooling_examples():
    assert pool([0.5, 0.5], Pooling(PoolingKind.NOISY_OR)) == 0.75
    # rank (10 - 1) * 0.9 = 8.1 sits between the ninth 0.1 and the 0.95
    assert pool([0.1] * 9 + [0.95]) == pytest.approx(0.1 + 0.1 * 0.85)
    assert pool([0.2, 0.9, 0.4, 0.8], Pooling(PoolingKind.TOPK, k=2)) == pytest.approx(0.85)


@given(probs)
def test_p90_matches_oracle(p):
    assert pool(p) == pytest.approx(oracles.quantile(p, 0.9), abs=1e-15)


@given(st.floats(0, 1), st.integers(1, 40), st.sampled_from(KINDS[:3]))
def test_constant_pools_to_itself(c, n, kind):
    assert pool([c] * n, kind) == c


@given(st.floats(0, 1), st.sampled_from(KINDS))
def test_single_window(c, kind):
    assert pool([c], kind) == c


@given(probs)
def test_pool_ordering(p):
    a = np.array(p)
    mx, nor = pool(a, Pooling(PoolingKind.MAX)), pool(a, Pooling(PoolingKind.NOISY_OR))
    assert nor >= mx >= pool(a, Pooling(PoolingKind.TOPK, k=3)) >= min(p)
    assert mx >= pool(a)


def test_pooling_parse():
    assert Pooling.parse("p75") == Pooling(PoolingKind.PERCENTILE, 0.75)
    assert Pooling.parse("top5") == Pooling(PoolingKind.TOPK, k=5)
    assert Pooling.parse("noisy-or").kind is PoolingKind.NOISY_OR
    with pytest.raises(ValueError):
        Pooling.parse("median")


def test_pool_by_subject_order():
    got = pool_by_subject([0.1, 0.9, 0.3], ["B", "A", "B"], Pooling(PoolingKind.MAX))
    assert list(got) == ["B", "A"] and got == {"B": 0.3, "A": 0.9}


def test_grid():
    assert GRID.size == 199 and GRID[0] == 0.01 and GRID[-1] == 0.99
    assert NEVER > 1.0


def test_separated_scores_take_largest_optimal_point():
    pi = [0.9, 0.9, 0.1, 0.1]
    res = tune_threshold(pi, [1, 1, 0, 0], [False] * 4, ThresholdPolicy(0.5, Constraints(None)))
    assert res.cost == 0.0
    assert res.tau == float(GRID[GRID <= 0.9][-1])
    assert res.tau == pytest.approx(0.89596, abs=1e-5)


def test_control_constraint_infeasible():
    pi = [0.8, 0.2, 0.99]
    with pytest.warns(UserWarning, match="no feasible threshold"):
        res = tune_threshold(pi, [1, 0, 0], [False, False, True], ThresholdPolicy(0.5, Constraints(0)))
    assert res.tau == NEVER and res.flag == "infeasible"
    # NEVER lies above every probability, so even p = 1 is not called
    assert not 1.0 >= res.tau


def test_alpha_one_prefers_largest_zero_fnr_point():
    pi = [0.3, 0.6, 0.2, 0.7]
    truth = [1, 1, 0, 0]
    res = tune_threshold(pi, truth, [False] * 4, ThresholdPolicy(1.0, Constraints(None)))
    assert res.cost == 0.0 and res.tau == float(GRID[GRID <= 0.3][-1])


def test_single_class_never_calls():
    res = tune_threshold([0.2, 0.7], [0, 0], [True, True])
    assert res.tau == NEVER and res.flag == "single_class"


@given(st.lists(st.tuples(st.floats(0, 1), st.booleans()), min_size=2, max_size=20),
       st.sampled_from([0.0, 0.3, 0.5, 1.0]))
def test_tuner_is_optimal(rows, alpha):
    pi = [r[0] for r in rows]
    truth = [int(r[1]) for r in rows]
    if len(set(truth)) < 2:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = tune_threshold(pi, truth, [False] * len(pi), ThresholdPolicy(alpha, Constraints(None)))
    costs = []
    for t in GRID:
        fp = sum(p >= t and not y for p, y in zip(pi, truth))
        fn = sum(p < t and y for p, y in zip(pi, truth))
        costs.append((1 - alpha) * fp / truth.count(0) + alpha * fn / truth.count(1))
    assert res.cost == pytest.approx(min(costs), abs=1e-12)
    assert res.tau == max(float(t) for t, c in zip(GRID, costs) if c <= min(costs) + 1e-12)


def test_per_label_overrides():
    pol = ThresholdPolicy.from_dict({"alpha": 0.5, "alpha_overrides": {"tremor": 0.8},
                                     "constraint_overrides": {"tremor": {"max_control_fp": 1}}})
    assert pol.alpha_for("tremor") == 0.8 and pol.alpha_for("chorea") == 0.5
    assert pol.constraints_for("tremor").max_control_fp == 1
    assert ThresholdPolicy.from_dict(pol.to_dict()) == pol


def test_profiles_and_confusion():
    P = np.array([[0.9, 0.1], [0.7, 0.2], [0.1, 0.05], [0.2, 0.6]])
    sids = ["P1", "P1", "C1", "C1"]
    truth = {"P1": [1, 0], "C1": [0, 0]}
    prof = infer_profiles(P, sids, truth, [0.5, 0.5], ["tremor", "chorea"], Pooling(PoolingKind.MAX),
                          {"C1": True})
    assert [p.subject_id for p in prof] == ["P1", "C1"]
    assert prof[0].roles == ["TP", "TN"] and prof[1].roles == ["TN", "FP"]
    conf = confusion_summary(prof)
    assert conf["chorea"] == {"TP": 0, "FN": 0, "FP": 1, "TN": 1, "control_fp": 1}
    quiet = infer_profiles(np.full((3, 8), 0.1), ["C2"] * 3, {"C2": [0] * 8}, [0.5] * 8, list("abcdefgh"))
    assert quiet[0].roles == ["TN"] * 8
