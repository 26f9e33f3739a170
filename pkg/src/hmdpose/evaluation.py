"""Window, subject and multi-label metrics plus decision-level importance."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .decide import Pooling, pool
from .errors import NoPositives, SingleClass
from .taxonomy import FEATURE_NAMES, FeatureName


def roc_auc(scores, truth) -> float:
    """Mann-Whitney AUC with mid-ranks for ties."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(truth).astype(bool)
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise SingleClass("ROC-AUC needs both classes")
    r = rankdata(s)
    return float((r[y].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def average_precision(scores, truth) -> float:
    """Step-wise AP over a descending sweep with tied scores handled as one step."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(truth).astype(bool)
    n1 = int(y.sum())
    if n1 == 0:
        raise NoPositives("average precision needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = np.cumsum(y)[last]
    k = last + 1
    recall = tp / n1
    precision = tp / k
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def _safe_div(a, b) -> float:
    return float(a / b) if b else 0.0


def f1(tp, fp, fn) -> float:
    return _safe_div(2 * tp, 2 * tp + fp + fn)


@dataclass
class BinaryMetrics:
    f1_pos: float
    f1_neg: float
    accuracy: float
    roc_auc: float
    auprc: float
    sensitivity: float
    specificity: float
    n: int
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def binary_metrics(truth, pred, scores=None) -> BinaryMetrics:
    y = np.asarray(truth).astype(bool)
    c = np.asarray(pred).astype(bool)
    tp, tn = int(np.sum(c & y)), int(np.sum(~c & ~y))
    fp, fn = int(np.sum(c & ~y)), int(np.sum(~c & y))
    flags = []
    if tp + fp + fn == 0:
        flags.append("f1_pos_undefined")
    if tn + fp + fn == 0:
        flags.append("f1_neg_undefined")
    auc = ap = float("nan")
    if scores is not None:
        try:
            auc = roc_auc(scores, y)
        except SingleClass:
            flags.append("roc_auc_single_class")
        try:
            ap = average_precision(scores, y)
        except NoPositives:
            flags.append("auprc_no_positives")
    return BinaryMetrics(f1(tp, fp, fn), f1(tn, fn, fp), _safe_div(tp + tn, y.size), auc, ap,
                         _safe_div(tp, tp + fn), _safe_div(tn, tn + fp), int(y.size), flags)


def hamming_accuracy(truth, calls) -> float:
    Y, C = np.asarray(truth).astype(bool), np.asarray(calls).astype(bool)
    return float(1.0 - np.mean(Y != C))


def jaccard_samples(truth, calls) -> float:
    """Mean per-sample |call & truth| / |call | truth|; an empty union counts as 1."""
    Y, C = np.asarray(truth).astype(bool), np.asarray(calls).astype(bool)
    inter = np.sum(Y & C, axis=1)
    union = np.sum(Y | C, axis=1)
    return float(np.mean(np.where(union == 0, 1.0, inter / np.maximum(union, 1))))


def exact_match(truth, calls) -> float:
    Y, C = np.asarray(truth).astype(bool), np.asarray(calls).astype(bool)
    return float(np.mean(np.all(Y == C, axis=1)))


@dataclass
class MultiLabelMetrics:
    macro_auc: float
    macro_auprc: float
    micro_f1: float
    macro_f1: float
    hamming_acc: float
    jaccard_samples: float
    exact_match: float
    per_label: dict
    skipped_auc: list
    skipped_auprc: list
    n_subjects: int

    @property
    def hamming_loss(self) -> float:
        return 1.0 - self.hamming_acc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hamming_loss"] = self.hamming_loss
        return d


def multilabel_metrics(truth, calls, scores, labels, is_control=None) -> MultiLabelMetrics:
    """Subject x label metrics; AUC/AUPRC macro means skip labels lacking a class."""
    Y = np.asarray(truth).astype(bool)
    C = np.asarray(calls).astype(bool)
    S = np.asarray(scores, dtype=float)
    ctrl = np.zeros(Y.shape[0], bool) if is_control is None else np.asarray(is_control).astype(bool)
    per_label, aucs, aps, f1s = {}, [], [], []
    skipped_auc, skipped_ap = [], []
    for j, lab in enumerate(labels):
        y, c = Y[:, j], C[:, j]
        tp, fp = int(np.sum(c & y)), int(np.sum(c & ~y))
        fn, tn = int(np.sum(~c & y)), int(np.sum(~c & ~y))
        entry = {"TP": tp, "FP": fp, "FN": fn, "TN": tn, "precision": _safe_div(tp, tp + fp),
                 "recall": _safe_div(tp, tp + fn), "specificity": _safe_div(tn, tn + fp),
                 "f1": f1(tp, fp, fn), "control_fp": int(np.sum(c & ctrl))}
        try:
            entry["roc_auc"] = roc_auc(S[:, j], y)
            aucs.append(entry["roc_auc"])
        except SingleClass:
            entry["roc_auc"] = None
            skipped_auc.append(str(lab))
        try:
            entry["auprc"] = average_precision(S[:, j], y)
            aps.append(entry["auprc"])
        except NoPositives:
            entry["auprc"] = None
            skipped_ap.append(str(lab))
        f1s.append(entry["f1"])
        per_label[str(lab)] = entry
    tp = int(np.sum(C & Y))
    fp = int(np.sum(C & ~Y))
    fn = int(np.sum(~C & Y))
    return MultiLabelMetrics(
        float(np.mean(aucs)) if aucs else float("nan"),
        float(np.mean(aps)) if aps else float("nan"),
        f1(tp, fp, fn), float(np.mean(f1s)) if f1s else float("nan"),
        hamming_accuracy(Y, C), jaccard_samples(Y, C), exact_match(Y, C),
        per_label, skipped_auc, skipped_ap, int(Y.shape[0]))


def multilabel_summary(profiles) -> MultiLabelMetrics:
    if not profiles:
        raise ValueError("no profiles to summarize")
    Y = np.array([p.truth for p in profiles])
    C = np.array([p.calls for p in profiles])
    S = np.array([p.pooled for p in profiles])
    return multilabel_metrics(Y, C, S, profiles[0].labels, [p.is_control for p in profiles])


def calibration_slope(probs, truth) -> float:
    """Slope of the logistic regression of outcomes on logit(p); 1 for calibrated scores."""
    from .learn.calibration import fit_sigmoid
    p = np.clip(np.asarray(probs, dtype=float), 1e-12, 1 - 1e-12)
    a, _ = fit_sigmoid(np.log(p / (1 - p)), truth)
    return a


# ---------------------------------------------------------------- importance

@dataclass
class ImportanceRecord:
    model: str
    fold: int
    label: str
    feature: FeatureName
    base_error: float
    delta_mean: float
    delta_std: float
    n_repeats: int
    deltas: tuple = ()

    def row(self) -> list:
        return [self.model, self.fold, self.label, str(self.feature), repr(self.base_error),
                repr(self.delta_mean), repr(self.delta_std)]


IMPORTANCE_COLUMNS = ("model", "fold", "label", "feature", "base_error", "delta_mean", "delta_std")


def patient_error(probs, subject_ids, truth_by_subject: dict, tau: float, pooling: Pooling) -> float:
    """(FP + FN) / N_patients after pooling and thresholding."""
    probs = np.asarray(probs, dtype=float)
    sids = np.asarray([str(s) for s in subject_ids])
    subjects = list(dict.fromkeys(sids))
    wrong = 0
    for s in subjects:
        call = pool(probs[sids == s], pooling) >= tau
        wrong += int(call != bool(truth_by_subject[s]))
    return wrong / len(subjects)


def permutation_importance(predict: Callable, X, subject_ids, truth_by_subject: dict, tau: float,
                           candidates: Sequence[int], label: str = "", model: str = "", fold: int = 0,
                           pooling: Pooling = Pooling(), repeats: int = 5, max_features: int = 50,
                           seed: int = 42, feature_names=FEATURE_NAMES) -> list[ImportanceRecord]:
    """Increase in patient error when one column is shuffled across the test windows.

    ``predict`` maps a window matrix to probabilities for ``label``; the
    threshold is fixed.  The first ``max_features`` candidate columns are
    permuted ``repeats`` times each, with a generator seeded by
    (seed, feature, repeat) so results do not depend on evaluation order.
    """
    X = np.asarray(X, dtype=float)
    base = patient_error(predict(X), subject_ids, truth_by_subject, tau, pooling)
    out = []
    for j in list(candidates)[:max_features]:
        j = int(j)
        deltas = []
        for r in range(repeats):
            rng = np.random.default_rng([seed, j, r])
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            deltas.append(patient_error(predict(Xp), subject_ids, truth_by_subject, tau, pooling) - base)
        d = np.asarray(deltas)
        out.append(ImportanceRecord(model, fold, label, feature_names[j], base, float(d.mean()),
                                    float(d.std()), repeats, tuple(float(v) for v in d)))
    return out


def write_importance_csv(records: Sequence[ImportanceRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IMPORTANCE_COLUMNS)
        for r in records:
            w.writerow(r.row())


def read_importance_csv(path) -> list[ImportanceRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(ImportanceRecord(row["model"], int(row["fold"]), row["label"],
                                        FeatureName.parse(row["feature"]), float(row["base_error"]),
                                        float(row["delta_mean"]), float(row["delta_std"]), 0))
    return out


def _group_key(feature: FeatureName, group_by: str) -> str:
    if group_by == "family":
        return feature.family.value
    if group_by == "region":
        return feature.region.value
    if group_by == "feature":
        return str(feature)
    raise ValueError(f"group_by must be 'family', 'region' or 'feature', got {group_by!r}")


def stable_features(records: Sequence[ImportanceRecord], stability_min_folds: int = 2) -> dict:
    """label -> {feature: summed positive mean delta} over features positive in enough folds."""
    by_label: dict[str, dict[FeatureName, list[float]]] = {}
    for r in records:
        by_label.setdefault(r.label, {}).setdefault(r.feature, []).append(r.delta_mean)
    out = {}
    for lab, feats in by_label.items():
        out[lab] = {f: float(sum(d for d in ds if d > 0)) for f, ds in feats.items()
                    if sum(d > 0 for d in ds) >= stability_min_folds}
    return out


def rollup_importance(records: Sequence[ImportanceRecord], group_by: str = "family",
                      stability_min_folds: int = 2) -> dict[str, dict[str, float]]:
    """Normalized share of positive delta per family or region within each label.

    Labels with no stable positive mass are omitted.
    """
    folds = {r.fold for r in records}
    if len(folds) < 2 and stability_min_folds > 1:
        raise ValueError("rollup needs importance records from at least two folds")
    out = {}
    for lab, feats in sorted(stable_features(records, stability_min_folds).items()):
        mass: dict[str, float] = {}
        for f, m in feats.items():
            if m > 0:
                key = _group_key(f, group_by)
                mass[key] = mass.get(key, 0.0) + m
        total = math.fsum(mass.values())
        if total > 0:
            out[lab] = {k: mass[k] / total for k in sorted(mass)}
    return out


def fold_family_shares(records: Sequence[ImportanceRecord], label: str, group_by: str = "family") -> dict:
    """fold -> {group: share of positive mean delta} for one label (no stability filter)."""
    out = {}
    for fold in sorted({r.fold for r in records if r.label == label}):
        mass: dict[str, float] = {}
        for r in records:
            if r.label == label and r.fold == fold and r.delta_mean > 0:
                key = _group_key(r.feature, group_by)
                mass[key] = mass.get(key, 0.0) + r.delta_mean
        total = math.fsum(mass.values())
        out[fold] = {k: v / total for k, v in sorted(mass.items())} if total > 0 else {}
    return out
