"""From window probabilities to subject-level calls.

Screening uses a majority vote over window predictions.  The multi-label
path pools window probabilities per subject and label, then applies a
per-label threshold tuned on training subjects under control-aware
constraints.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NoFeasibleThreshold

GRID = np.round(np.linspace(0.01, 0.99, 199), 6)
# calls are pooled >= tau, so a tau just above 1 never calls positive
NEVER = float(np.nextafter(1.0, 2.0))
COST_TOL = 1e-12


def majority_vote(window_preds) -> int:
    preds = np.asarray(window_preds, dtype=float)
    if preds.size == 0:
        raise ValueError("majority vote over no windows")
    return int(preds.mean() >= 0.5)


class PoolingKind(str, Enum):
    PERCENTILE = "percentile"
    MAX = "max"
    TOPK = "topk"
    NOISY_OR = "noisy_or"


@dataclass(frozen=True)
class Pooling:
    kind: PoolingKind = PoolingKind.PERCENTILE
    q: float = 0.90
    k: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", PoolingKind(self.kind))
        if not 0 < self.q < 1:
            raise ValueError("percentile q must lie in (0, 1)")
        if self.k < 1:
            raise ValueError("top-k needs k >= 1")

    @classmethod
    def parse(cls, text: str) -> "Pooling":
        """'p90', 'max', 'top3', 'noisy_or' (also 'noisyor')."""
        t = str(text).strip().lower()
        if t == "max":
            return cls(PoolingKind.MAX)
        if t in ("noisy_or", "noisyor", "noisy-or"):
            return cls(PoolingKind.NOISY_OR)
        if t.startswith("top"):
            return cls(PoolingKind.TOPK, k=int(t[3:] or 3))
        if t.startswith("p"):
            return cls(PoolingKind.PERCENTILE, q=int(t[1:]) / 100)
        raise ValueError(f"unknown pooling {text!r}")

    @property
    def label(self) -> str:
        if self.kind is PoolingKind.PERCENTILE:
            return f"p{round(self.q * 100):d}"
        if self.kind is PoolingKind.TOPK:
            return f"top{self.k}"
        return self.kind.value


def percentile(probs, q: float) -> float:
    """Linear-interpolation quantile written so rounding stays monotone.

    The convex combination is clamped into its bracketing order statistics,
    which keeps constants exact and single-element increases order-preserving.
    """
    p = np.sort(np.asarray(probs, dtype=float))
    h = (p.size - 1) * q
    lo = int(np.floor(h))
    hi = min(lo + 1, p.size - 1)
    a, b = p[lo], p[hi]
    g = h - lo
    return float(min(max((1.0 - g) * a + g * b, a), b))


def pool(probs, pooling: Pooling = Pooling()) -> float:
    p = np.asarray(probs, dtype=float)
    if p.size == 0:
        raise ValueError("cannot pool zero windows")
    if p.size == 1:
        return float(p[0])
    kind = pooling.kind
    if kind is PoolingKind.MAX:
        return float(p.max())
    if kind is PoolingKind.PERCENTILE:
        return percentile(p, pooling.q)
    if kind is PoolingKind.TOPK:
        top = np.sort(p)[::-1][:pooling.k]
        return float(min(max(top.sum() / top.size, top[-1]), top[0]))
    return float(min(1.0, max(1.0 - np.prod(1.0 - p), p.max())))


def pool_by_subject(probs, subject_ids, pooling: Pooling = Pooling()) -> dict[str, float]:
    probs = np.asarray(probs, dtype=float)
    sids = np.asarray([str(s) for s in subject_ids])
    order = list(dict.fromkeys(sids))
    return {s: pool(probs[sids == s], pooling) for s in order}


@dataclass(frozen=True)
class Constraints:
    max_control_fp: int | None = 0
    max_control_fpr: float | None = None
    min_specificity: float | None = None

    def to_dict(self) -> dict:
        return {"max_control_fp": self.max_control_fp, "max_control_fpr": self.max_control_fpr,
                "min_specificity": self.min_specificity}


@dataclass
class ThresholdPolicy:
    """Cost weight and constraints, with optional per-label overrides."""

    alpha: float = 0.5
    constraints: Constraints = field(default_factory=Constraints)
    alpha_overrides: dict = field(default_factory=dict)
    constraint_overrides: dict = field(default_factory=dict)

    def alpha_for(self, label) -> float:
        a = float(self.alpha_overrides.get(str(label), self.alpha))
        if not 0 <= a <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {a}")
        return a

    def constraints_for(self, label) -> Constraints:
        c = self.constraint_overrides.get(str(label))
        if c is None:
            return self.constraints
        return c if isinstance(c, Constraints) else Constraints(**c)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "constraints": self.constraints.to_dict(),
                "alpha_overrides": dict(sorted(self.alpha_overrides.items())),
                "constraint_overrides": {k: self.constraints_for(k).to_dict()
                                         for k in sorted(self.constraint_overrides)}}

    @classmethod
    def from_dict(cls, d: dict | None) -> "ThresholdPolicy":
        d = d or {}
        return cls(float(d.get("alpha", 0.5)), Constraints(**d.get("constraints", {})),
                   {str(k): float(v) for k, v in d.get("alpha_overrides", {}).items()},
                   {str(k): Constraints(**v) for k, v in d.get("constraint_overrides", {}).items()})


@dataclass
class ThresholdResult:
    tau: float
    cost: float
    flag: str | None = None


def operating_point(pi, truth, is_control, t: float) -> dict:
    """Confusion counts and rates on training subjects at threshold t."""
    pi = np.asarray(pi, dtype=float)
    truth = np.asarray(truth).astype(bool)
    ctrl = np.asarray(is_control).astype(bool)
    call = pi >= t
    n_pos, n_neg, n_ctrl = truth.sum(), (~truth).sum(), ctrl.sum()
    fp = int(np.sum(call & ~truth))
    fn = int(np.sum(~call & truth))
    control_fp = int(np.sum(call & ctrl))
    return {
        "fp": fp, "fn": fn, "control_fp": control_fp,
        "fpr": fp / n_neg if n_neg else 0.0,
        "fnr": fn / n_pos if n_pos else 0.0,
        "control_fpr": control_fp / n_ctrl if n_ctrl else 0.0,
        "specificity": 1.0 - fp / n_neg if n_neg else 1.0,
    }


def clinical_cost(op: dict, alpha: float) -> float:
    return (1.0 - alpha) * op["fpr"] + alpha * op["fnr"]


def feasible(op: dict, c: Constraints) -> bool:
    if c.max_control_fp is not None and op["control_fp"] > c.max_control_fp:
        return False
    if c.max_control_fpr is not None and op["control_fpr"] > c.max_control_fpr:
        return False
    if c.min_specificity is not None and op["specificity"] < c.min_specificity:
        return False
    return True


def tune_threshold(pi, truth, is_control, policy: ThresholdPolicy = ThresholdPolicy(), label=None,
                   grid=GRID) -> ThresholdResult:
    """Grid threshold minimizing the clinical cost among feasible points.

    Ties resolve to the largest threshold.  Without both classes, or without
    any feasible grid point, the result never calls positive and carries a
    flag (the latter also warns with ``NoFeasibleThreshold``).
    """
    truth = np.asarray(truth).astype(bool)
    if truth.all() or not truth.any():
        return ThresholdResult(NEVER, float("nan"), "single_class")
    alpha = policy.alpha_for(label)
    cons = policy.constraints_for(label)
    costs = np.full(len(grid), np.inf)
    for i, t in enumerate(grid):
        op = operating_point(pi, truth, is_control, t)
        if feasible(op, cons):
            costs[i] = clinical_cost(op, alpha)
    if not np.isfinite(costs).any():
        warnings.warn(str(NoFeasibleThreshold(f"no feasible threshold for label {label}")), stacklevel=2)
        return ThresholdResult(NEVER, float("nan"), "infeasible")
    best = np.flatnonzero(costs <= costs.min() + COST_TOL)[-1]
    return ThresholdResult(float(grid[best]), float(costs[best]))


def confusion_role(call: int, truth: int) -> str:
    return {(1, 1): "TP", (0, 0): "TN", (1, 0): "FP", (0, 1): "FN"}[(int(call), int(truth))]


@dataclass
class PatientProfile:
    subject_id: str
    labels: tuple
    pooled: np.ndarray
    thresholds: np.ndarray
    truth: np.ndarray
    is_control: bool = False

    @property
    def calls(self) -> np.ndarray:
        return (self.pooled >= self.thresholds).astype(np.int8)

    @property
    def roles(self) -> list[str]:
        return [confusion_role(c, t) for c, t in zip(self.calls, self.truth)]

    def to_dict(self) -> dict:
        return {"subject": self.subject_id, "is_control": bool(self.is_control), "labels": list(self.labels),
                "pooled": [float(v) for v in self.pooled], "thresholds": [float(v) for v in self.thresholds],
                "calls": [int(v) for v in self.calls], "truth": [int(v) for v in self.truth],
                "roles": self.roles}


def infer_profiles(prob_matrix, subject_ids, truth_by_subject: dict, thresholds, labels: Sequence,
                   pooling: Pooling = Pooling(), is_control: dict | None = None) -> list[PatientProfile]:
    """One profile per subject from window probabilities (windows x labels).

    ``truth_by_subject`` holds the OR of each subject's window labels.
    """
    P = np.asarray(prob_matrix, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    sids = np.asarray([str(s) for s in subject_ids])
    tau = np.asarray(thresholds, dtype=float)
    is_control = is_control or {}
    profiles = []
    for s in dict.fromkeys(sids):
        rows = P[sids == s]
        pooled = np.array([pool(rows[:, j], pooling) for j in range(P.shape[1])])
        profiles.append(PatientProfile(s, tuple(str(x) for x in labels), pooled, tau.copy(),
                                       np.asarray(truth_by_subject[s], dtype=np.int8),
                                       bool(is_control.get(s, False))))
    return profiles


def confusion_summary(profiles: Sequence[PatientProfile]) -> dict:
    """Per-label TP/FN/FP/TN counts plus control false positives."""
    labels = profiles[0].labels
    out = {}
    for j, lab in enumerate(labels):
        counts = {"TP": 0, "FN": 0, "FP": 0, "TN": 0, "control_fp": 0}
        for p in profiles:
            role = p.roles[j]
            counts[role] += 1
            if role == "FP" and p.is_control:
                counts["control_fp"] += 1
        out[lab] = counts
    return out


PROFILE_COLUMNS = ("subject", "label", "pooled", "threshold", "call", "truth", "role")


def write_profiles_csv(profiles: Sequence[PatientProfile], path, extra: dict | None = None) -> None:
    """Long format, one row per subject and label; ``extra`` adds constant columns."""
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(PROFILE_COLUMNS) + list(extra))
        for p in profiles:
            for j, lab in enumerate(p.labels):
                w.writerow([p.subject_id, lab, repr(float(p.pooled[j])), repr(float(p.thresholds[j])),
                            int(p.calls[j]), int(p.truth[j]), p.roles[j]] + list(extra.values()))


def write_profiles_json(profiles: Sequence[PatientProfile], path, extra: dict | None = None) -> None:
    doc = dict(extra or {})
    doc["profiles"] = [p.to_dict() for p in profiles]
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
