"""Subject-grouped fold planning and training-fold class balancing."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TooFewSubjects


@dataclass
class FoldPlan:
    """Subject -> fold assignment; window index sets are derived from it."""

    k: int
    seed: int
    assignments: dict[str, int]

    def test_subjects(self, fold: int) -> list[str]:
        return [s for s, f in self.assignments.items() if f == fold]

    def train_subjects(self, fold: int) -> list[str]:
        return [s for s, f in self.assignments.items() if f != fold]

    def fold_sizes(self) -> list[int]:
        return [len(self.test_subjects(f)) for f in range(self.k)]

    def split(self, groups) -> list[tuple[np.ndarray, np.ndarray]]:
        """(train_idx, test_idx) per fold for rows labelled by ``groups``."""
        fold_of = np.array([self.assignments[str(g)] for g in groups])
        return [(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(self.k)]

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "assignments": dict(sorted(self.assignments.items()))}

    @classmethod
    def from_dict(cls, d: dict) -> "FoldPlan":
        return cls(int(d["k"]), int(d["seed"]), {str(s): int(f) for s, f in d["assignments"].items()})

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FoldPlan":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _unique_in_order(groups) -> list[str]:
    seen: dict[str, None] = {}
    for g in groups:
        seen.setdefault(str(g), None)
    return list(seen)


def stratified_group_kfold(y, groups, k: int = 5, seed: int = 42) -> FoldPlan:
    """Greedy stratified assignment of whole subjects to k folds.

    Subjects are visited by descending row count (seeded shuffle breaks count
    ties) and each goes to the fold that keeps the per-class fractions closest
    to 1/k across folds; remaining ties go to the smaller fold, then the lower
    fold index.
    """
    y = np.asarray(y)
    groups = np.asarray([str(g) for g in groups], dtype=object)
    subjects = _unique_in_order(groups)
    if len(subjects) < k:
        raise TooFewSubjects(f"{len(subjects)} subjects cannot fill {k} folds")
    classes = np.unique(y)
    index = {s: i for i, s in enumerate(subjects)}
    gi = np.array([index[g] for g in groups])
    counts = np.zeros((len(subjects), len(classes)))
    for c, cls in enumerate(classes):
        counts[:, c] = np.bincount(gi[y == cls], minlength=len(subjects))
    totals = counts.sum(axis=0)

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(subjects))
    order = order[np.argsort(-counts[order].sum(axis=1), kind="stable")]

    fold_counts = np.zeros((k, len(classes)))
    assignments: dict[str, int] = {}
    for s in order:
        best, best_key = 0, None
        for f in range(k):
            fold_counts[f] += counts[s]
            cost = float(np.mean(np.std(fold_counts / totals, axis=0)))
            key = (round(cost, 12), fold_counts[f].sum() - counts[s].sum(), f)
            fold_counts[f] -= counts[s]
            if best_key is None or key < best_key:
                best, best_key = f, key
        fold_counts[best] += counts[s]
        assignments[subjects[s]] = best
    return FoldPlan(k, seed, {s: assignments[s] for s in subjects})


def multilabel_stratified_kfold(subject_or_labels: dict, k: int = 5, seed: int = 42) -> FoldPlan:
    """Iterative stratification of subject-level label vectors.

    The label with the fewest unassigned positive subjects is handled first;
    each of its subjects goes to the fold with the largest remaining demand
    for that label, then the largest remaining demand for subjects, with
    seeded random choice among exact ties.  Subjects without positive labels
    are spread by remaining fold demand.
    """
    subjects = [str(s) for s in subject_or_labels]
    if len(subjects) < k:
        raise TooFewSubjects(f"{len(subjects)} subjects cannot fill {k} folds")
    Y = np.array([np.asarray(subject_or_labels[s]) for s in subject_or_labels], dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = len(subjects)
    rng = np.random.default_rng(seed)
    visit = list(rng.permutation(n))
    want_total = np.full(k, n / k)
    want_label = np.tile(Y.sum(axis=0) / k, (k, 1))
    unassigned = np.ones(n, dtype=bool)
    fold = np.full(n, -1)

    def pick(candidates: np.ndarray) -> int:
        return int(candidates[0]) if candidates.size == 1 else int(rng.choice(candidates))

    while unassigned.any():
        remaining = Y[unassigned].sum(axis=0)
        if remaining.any():
            label = int(np.argmin(np.where(remaining > 0, remaining, np.inf)))
            batch = [i for i in visit if unassigned[i] and Y[i, label] > 0]
        else:
            label = None
            batch = [i for i in visit if unassigned[i]]
        for i in batch:
            if label is None:
                cand = np.flatnonzero(want_total == want_total.max())
            else:
                col = want_label[:, label]
                cand = np.flatnonzero(col == col.max())
                if cand.size > 1:
                    sub = want_total[cand]
                    cand = cand[sub == sub.max()]
            f = pick(cand)
            fold[i] = f
            unassigned[i] = False
            want_label[f] -= Y[i]
            want_total[f] -= 1
    return FoldPlan(k, seed, {s: int(fold[i]) for i, s in enumerate(subjects)})


def undersample_majority(y, seed: int = 42, threshold: float = 0.2) -> np.ndarray:
    """Row indices of a balanced training set.

    When |n0 - n1| / max(n0, n1) exceeds ``threshold`` the majority class is
    sampled without replacement down to the minority count; otherwise every
    index is returned.  Minority rows are never dropped.
    """
    y = np.asarray(y)
    idx0, idx1 = np.flatnonzero(y == 0), np.flatnonzero(y == 1)
    n0, n1 = idx0.size, idx1.size
    if n0 == 0 or n1 == 0 or abs(n0 - n1) / max(n0, n1) <= threshold:
        return np.arange(y.size)
    rng = np.random.default_rng(seed)
    major, minor = (idx0, idx1) if n0 > n1 else (idx1, idx0)
    kept = rng.choice(major, size=minor.size, replace=False)
    return np.sort(np.concatenate([minor, kept]))
