"""Task runners: screening, per-subject binary, condition-stratified, multi-label, importance.

Every runner takes a ``RunConfig`` and writes its reports into
``config.output_dir``.  Reports are JSON/CSV with sorted keys and repr
floats so identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RunConfig, file_sha256
from .dataset import (
    WindowRecord,
    build_multilabel,
    build_screening,
    build_symptom_enriched,
    extract_cohort,
    feature_manifest,
    group_by_subject,
    manifest_path_for,
    read_feature_csv,
    stratify_by_condition,
    write_feature_csv,
)
from .decide import (
    NEVER,
    Constraints,
    Pooling,
    ThresholdPolicy,
    clinical_cost,
    confusion_summary,
    infer_profiles,
    majority_vote,
    operating_point,
    pool_by_subject,
    tune_threshold,
    write_profiles_csv,
    write_profiles_json,
)
from .errors import DegenerateData, DegenerateDataset, InputError, SubjectExcluded, TooFewSubjects
from .evaluation import (
    SingleClass,
    average_precision,
    binary_metrics,
    f1,
    fold_family_shares,
    multilabel_summary,
    permutation_importance,
    rollup_importance,
    roc_auc,
    write_importance_csv,
)
from .features import FeatureConfig
from .ingest import load_pose_dir
from .learn.pipeline import PipelineSpec, expand_grid, fit_pipeline, grid_search, load_bundle, save_bundle
from .splits import FoldPlan, multilabel_stratified_kfold, stratified_group_kfold, undersample_majority
from .synth import CohortConfig, generate_cohort, write_cohort
from .taxonomy import FEATURE_NAMES, Condition, parse_phenotype


# ---------------------------------------------------------------- report I/O

def clean(obj):
    """JSON-safe copy: NaN/inf -> None, numpy scalars -> Python, tuples -> lists."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(path, obj, config_hash: str | None = None) -> Path:
    doc = clean(obj)
    if config_hash is not None:
        doc = {"config_hash": config_hash, **doc}
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def mean_std(values) -> dict:
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"mean": None, "std": None, "n": 0}
    return {"mean": float(v.mean()), "std": float(v.std()), "n": int(v.size)}


def specs_from_config(cfg: RunConfig) -> list[PipelineSpec]:
    g = cfg.grid
    return expand_grid(tuple(g["scalers"]), tuple(g["select_k"]), g["models"], tuple(g["calibration"]),
                       g.get("class_weight"))


def load_records(cfg: RunConfig) -> list[WindowRecord]:
    if not cfg.features:
        raise InputError("this task needs a feature CSV (set 'features' or pass --features)")
    path = Path(cfg.features)
    if not path.exists():
        raise InputError(f"feature CSV {path} does not exist")
    return read_feature_csv(path)


def input_digest(cfg: RunConfig) -> dict:
    out = {}
    for key in ("features",):
        p = getattr(cfg, key)
        if p and Path(p).exists():
            out[key] = {"name": Path(p).name, "sha256": file_sha256(p)}
            m = manifest_path_for(p)
            if m.exists():
                out[key + "_manifest"] = {"name": m.name, "sha256": file_sha256(m)}
    if cfg.pose_dir and Path(cfg.pose_dir).is_dir():
        out["pose_dir"] = {p.name: file_sha256(p) for p in sorted(Path(cfg.pose_dir).glob("*.csv"))}
    return out


def _finish(cfg: RunConfig, out: Path, written: list[Path]) -> dict:
    h = cfg.hash()
    cfg_doc = cfg.to_dict()
    cfg_doc.pop("output_dir")
    dump_json(out / "config.json", cfg_doc, h)
    manifest = {"task": cfg.task, "inputs": input_digest(cfg),
                "artifacts": sorted(str(p.relative_to(out)) for p in written + [out / "config.json"])}
    dump_json(out / "manifest.json", manifest, h)
    return manifest


# ---------------------------------------------------------------- label-level scoring

LABEL_COMPARATOR = {
    "macro_auc": "roc_auc", "roc_auc": "roc_auc",
    "macro_auprc": "auprc", "auprc": "auprc",
    "f1_pos": "f1_pos", "hamming": "hamming", "jaccard": "jaccard", "clinical_cost": "clinical_cost",
}


def label_score(metric: str, pi, truth, is_control, tau: float, alpha: float) -> float:
    """Subject-level score of one label under a comparator (NaN when undefined)."""
    pi = np.asarray(pi, dtype=float)
    truth = np.asarray(truth).astype(bool)
    try:
        if metric == "roc_auc":
            return roc_auc(pi, truth)
        if metric == "auprc":
            return average_precision(pi, truth)
    except SingleClass:
        return float("nan")
    call = pi >= tau
    tp, fp, fn = int(np.sum(call & truth)), int(np.sum(call & ~truth)), int(np.sum(~call & truth))
    if metric == "f1_pos":
        return f1(tp, fp, fn)
    if metric == "hamming":
        return float(np.mean(call == truth))
    if metric == "jaccard":
        return tp / (tp + fp + fn) if tp + fp + fn else 1.0
    if metric == "clinical_cost":
        if truth.all() or not truth.any():
            return float("nan")
        return clinical_cost(operating_point(pi, truth, is_control, tau), alpha)
    raise ValueError(f"unknown comparator {metric!r}")


# ---------------------------------------------------------------- multi-label

@dataclass
class LabelFold:
    label: str
    spec: PipelineSpec | None
    pipeline: object
    tau: float
    flag: str | None
    grid_table: dict = field(default_factory=dict)
    test_probs: np.ndarray | None = None


def _subject_truth(Y, mask, sids, subjects) -> dict[str, np.ndarray]:
    return {s: np.max(np.where(mask[sids == s], Y[sids == s], 0), axis=0).astype(np.int8) for s in subjects}


def _fit_label(X, y, spec, seed):
    if y.size == 0 or y.min() == y.max():
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit_pipeline(spec, X, y, seed=seed)


def _tune_label(cfg: RunConfig, policy: ThresholdPolicy, specs, ds, j: int, train_idx: np.ndarray,
                inner: FoldPlan, truth: dict, ctrl: dict, pooling: Pooling, fold_seed: int) -> LabelFold:
    """Select a spec on inner folds, tune tau on its out-of-fold pooled scores, refit."""
    lab = ds.label_names[j]
    sids = ds.subject_ids
    train_subjects = list(dict.fromkeys(sids[train_idx]))
    y_sub = np.array([truth[s][j] for s in train_subjects])
    metric = LABEL_COMPARATOR.get(cfg.comparator)
    if metric is None:
        raise ValueError(f"unknown comparator {cfg.comparator!r}")
    alpha = policy.alpha_for(lab)
    oof: dict[str, dict[str, float]] = {}
    fold_scores: dict[str, list] = {}

    def evaluate(spec: PipelineSpec):
        pooled: dict[str, float] = {}
        parts = []
        for f in range(inner.k):
            tr_sub = set(inner.train_subjects(f))
            te_sub = inner.test_subjects(f)
            tr = train_idx[np.isin(sids[train_idx], list(tr_sub)) & ds.mask[train_idx, j]]
            te = train_idx[np.isin(sids[train_idx], te_sub)]
            pipe = _fit_label(ds.X[tr], ds.Y[tr, j], spec, fold_seed + f)
            if pipe is None or te.size == 0:
                continue
            got = pool_by_subject(pipe.predict_proba(ds.X[te]), sids[te], pooling)
            pooled.update(got)
            parts.append(list(got))
        oof[spec.label] = pooled
        if not pooled:
            return [float("nan")]
        subj = [s for s in train_subjects if s in pooled]
        pi = np.array([pooled[s] for s in subj])
        tt = np.array([truth[s][j] for s in subj])
        cc = np.array([ctrl[s] for s in subj])
        tau = tune_threshold(pi, tt, cc, policy, lab).tau
        vals = []
        for members in parts:
            m = np.array([pooled[s] for s in members])
            vals.append(label_score(metric, m, [truth[s][j] for s in members], [ctrl[s] for s in members],
                                    tau, alpha))
        fold_scores[spec.label] = vals
        return vals

    if y_sub.min() == y_sub.max():
        return LabelFold(lab, None, None, NEVER, "single_class")
    comparator = "clinical_cost" if metric == "clinical_cost" else "score"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        best, table = grid_search(specs, evaluate, comparator) if len(specs) > 1 else (specs[0], {})
        if len(specs) == 1 and cfg.threshold_source == "oof":
            evaluate(specs[0])
    tr = train_idx[ds.mask[train_idx, j]]
    pipe = _fit_label(ds.X[tr], ds.Y[tr, j], best, fold_seed)
    if pipe is None:
        return LabelFold(lab, best, None, NEVER, "single_class", table)
    if cfg.threshold_source == "oof" and oof.get(best.label):
        pooled = oof[best.label]
    else:
        pooled = pool_by_subject(pipe.predict_proba(ds.X[train_idx]), sids[train_idx], pooling)
    subj = [s for s in train_subjects if s in pooled]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = tune_threshold(np.array([pooled[s] for s in subj]), np.array([truth[s][j] for s in subj]),
                             np.array([ctrl[s] for s in subj]), policy, lab)
    return LabelFold(lab, best, pipe, res.tau, res.flag, table)


def run_multilabel(cfg: RunConfig, records: Sequence[WindowRecord] | None = None) -> dict:
    records = load_records(cfg) if records is None else records
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    ds = build_multilabel(records, cfg.include_all_zero, cfg.labels)
    if len(ds.subjects) < cfg.k:
        raise TooFewSubjects(f"{len(ds.subjects)} subjects cannot fill {cfg.k} folds; lower k or add subjects")
    specs = specs_from_config(cfg)
    policy = ThresholdPolicy.from_dict(cfg.threshold)
    pooling = Pooling.parse(cfg.pooling)
    sids = ds.subject_ids
    subjects = ds.subjects
    ctrl = ds.subject_is_control()
    truth = _subject_truth(ds.Y, ds.mask, sids, subjects)
    plan = multilabel_stratified_kfold({s: truth[s] for s in subjects}, cfg.k, cfg.seed)
    written = [out / "fold_plan.json"]
    dump_json(out / "fold_plan.json", plan.to_dict(), h)

    all_profiles, fold_reports, thresholds, selection = [], [], {}, {}
    fold_fits: dict[int, list[LabelFold]] = {}
    for f in range(cfg.k):
        test_sub = plan.test_subjects(f)
        train_sub = plan.train_subjects(f)
        train_idx = np.flatnonzero(np.isin(sids, train_sub))
        test_idx = np.flatnonzero(np.isin(sids, test_sub))
        inner_k = min(cfg.inner_k, len(train_sub))
        inner = multilabel_stratified_kfold({s: truth[s] for s in train_sub}, inner_k, cfg.seed + 1000 + f)
        fits = []
        P = np.zeros((test_idx.size, len(ds.label_names)))
        for j in range(len(ds.label_names)):
            lf = _tune_label(cfg, policy, specs, ds, j, train_idx, inner, truth, ctrl, pooling,
                             cfg.seed + 100 * f)
            if lf.pipeline is not None:
                P[:, j] = lf.pipeline.predict_proba(ds.X[test_idx])
            lf.test_probs = P[:, j]
            fits.append(lf)
        fold_fits[f] = fits
        taus = [lf.tau for lf in fits]
        profiles = infer_profiles(P, sids[test_idx], truth, taus, ds.label_names, pooling, ctrl)
        for p in profiles:
            all_profiles.append((f, p))
        fold_reports.append({"fold": f, "test_subjects": sorted(test_sub),
                             "metrics": multilabel_summary(profiles).to_dict()})
        thresholds[str(f)] = {lf.label: {"tau": lf.tau, "flag": lf.flag,
                                         "spec": lf.spec.label if lf.spec else None} for lf in fits}
        selection[str(f)] = {lf.label: lf.grid_table for lf in fits}
        if cfg.save_bundles:
            for lf in fits:
                if lf.pipeline is not None:
                    d = save_bundle(lf.pipeline, out / "bundles" / f"fold{f}" / lf.label,
                                    {"fold": f, "label": lf.label, "tau": lf.tau, "flag": lf.flag,
                                     "pooling": pooling.label, "config_hash": h})
                    written.extend(sorted(d.iterdir()))

    profiles = [p for _, p in all_profiles]
    pooled_metrics = multilabel_summary(profiles).to_dict()
    keys = ("macro_auc", "macro_auprc", "micro_f1", "macro_f1", "hamming_acc", "jaccard_samples", "exact_match")
    summary = {k: mean_std([r["metrics"][k] for r in fold_reports]) for k in keys}
    control_fp = sum(v["control_fp"] for v in pooled_metrics["per_label"].values())
    metrics = {"task": "multilabel", "labels": list(ds.label_names), "pooling": pooling.label, "k": cfg.k,
               "summary": summary, "pooled": pooled_metrics, "folds": fold_reports,
               "control_false_positives": control_fp, "dataset": ds.manifest()}
    written += [dump_json(out / "metrics.json", metrics, h),
                dump_json(out / "thresholds.json", thresholds, h),
                dump_json(out / "selection.json", selection, h),
                dump_json(out / "confusion.json", confusion_summary(profiles), h)]
    fold_col = {p.subject_id: f for f, p in all_profiles}
    write_profiles_csv(profiles, out / "profiles.csv")
    write_profiles_json(sorted(profiles, key=lambda p: p.subject_id), out / "profiles.json",
                        {"config_hash": h, "fold": dict(sorted(fold_col.items()))})
    written += [out / "profiles.csv", out / "profiles.json"]

    result = {"metrics": metrics, "plan": plan, "fits": fold_fits, "dataset": ds, "truth": truth,
              "profiles": profiles}
    if cfg.importance.get("enabled"):
        recs = _importance_from_fits(cfg, ds, plan, fold_fits, truth, pooling)
        written += _write_importance(cfg, out, recs, h)
        result["importance"] = recs
    result["manifest"] = _finish(cfg, out, written)
    return result


# ---------------------------------------------------------------- importance

def _importance_from_fits(cfg, ds, plan, fold_fits, truth, pooling):
    imp = cfg.importance
    recs = []
    for f, fits in sorted(fold_fits.items()):
        test_idx = np.flatnonzero(np.isin(ds.subject_ids, plan.test_subjects(f)))
        for j, lf in enumerate(fits):
            if lf.pipeline is None or lf.flag is not None:
                continue
            t = {s: int(truth[s][j]) for s in plan.test_subjects(f)}
            recs += permutation_importance(lf.pipeline.predict_proba, ds.X[test_idx], ds.subject_ids[test_idx],
                                           t, lf.tau, lf.pipeline.candidate_features(), lf.label,
                                           lf.spec.label, f, pooling, int(imp["repeats"]),
                                           int(imp["max_features"]), cfg.seed)
    return recs


def _write_importance(cfg, out: Path, recs, h) -> list[Path]:
    write_importance_csv(recs, out / "importance.csv")
    stab = int(cfg.importance.get("stability_min_folds", 2))
    folds = {r.fold for r in recs}
    rollups = {}
    if len(folds) >= 2 or stab <= 1:
        rollups = {g: rollup_importance(recs, g, stab) for g in ("family", "region")}
    labels = sorted({r.label for r in recs})
    per_fold = {lab: {str(k): v for k, v in fold_family_shares(recs, lab).items()} for lab in labels}
    return [out / "importance.csv",
            dump_json(out / "rollups.json", {"stability_min_folds": stab, "rollups": rollups,
                                             "fold_family_shares": per_fold}, h)]


def run_importance(cfg: RunConfig, records: Sequence[WindowRecord] | None = None) -> dict:
    """Permutation importance from the bundles and fold plan of a finished multi-label run."""
    if not cfg.bundle_dir:
        raise InputError("importance task needs 'bundle_dir' pointing at a finished multilabel run")
    run = Path(cfg.bundle_dir)
    if not (run / "fold_plan.json").exists() or not (run / "bundles").is_dir():
        raise InputError(f"{run} holds no model bundles; run the multilabel task first and pass its output dir")
    records = load_records(cfg) if records is None else records
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    pdoc = json.loads((run / "fold_plan.json").read_text(encoding="utf-8"))
    plan = FoldPlan.from_dict(pdoc)
    ds = build_multilabel(records, cfg.include_all_zero, cfg.labels)
    truth = _subject_truth(ds.Y, ds.mask, ds.subject_ids, ds.subjects)
    pooling = Pooling.parse(cfg.pooling)
    fold_fits = {}
    for f in range(plan.k):
        fits = []
        for lab in ds.label_names:
            bdir = run / "bundles" / f"fold{f}" / lab
            if not (bdir / "spec.json").exists():
                fits.append(LabelFold(lab, None, None, NEVER, "single_class"))
                continue
            meta = json.loads((bdir / "spec.json").read_text(encoding="utf-8"))
            pipe = load_bundle(bdir)
            extra = meta.get("extra", {})
            fits.append(LabelFold(lab, pipe.spec, pipe, float(extra.get("tau", NEVER)), extra.get("flag")))
        fold_fits[f] = fits
    recs = _importance_from_fits(cfg, ds, plan, fold_fits, truth, pooling)
    written = _write_importance(cfg, out, recs, h)
    return {"importance": recs, "manifest": _finish(cfg, out, written)}


# ---------------------------------------------------------------- screening

def _fit_binary(cfg, specs, X, y, groups, seed, metric: str):
    """Best spec by inner grouped CV (window level), then a refit on all rows."""
    if len(specs) > 1:
        uniq = list(dict.fromkeys(groups))
        k = min(cfg.inner_k, len(uniq))
        inner = stratified_group_kfold(y, groups, k, seed)

        def evaluate(spec):
            vals = []
            for tr, te in inner.split(groups):
                if y[tr].min() == y[tr].max() or te.size == 0:
                    continue
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    p = fit_pipeline(spec, X[tr], y[tr], seed).predict_proba(X[te])
                m = binary_metrics(y[te], p >= 0.5, p)
                vals.append(m.roc_auc if metric == "roc_auc" else m.f1_pos)
            return vals or [float("nan")]

        best, table = grid_search(specs, evaluate, metric)
    else:
        best, table = specs[0], {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit_pipeline(best, X, y, seed), table


def run_screening(cfg: RunConfig, records: Sequence[WindowRecord] | None = None) -> dict:
    records = load_records(cfg) if records is None else records
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    if not any(r.is_control for r in records):
        raise DegenerateDataset("screening needs control subjects: negatives are drawn from controls only")
    ds = build_screening(records, cfg.phenotype)
    groups = ds.subject_ids.astype(str)
    plan = stratified_group_kfold(ds.y, groups, cfg.k, cfg.seed)
    specs = specs_from_config(cfg)
    metric = "roc_auc" if cfg.comparator in ("roc_auc", "macro_auc") else "f1_pos"
    written = [dump_json(out / "fold_plan.json", plan.to_dict(), h)]
    rows, folds = [], []
    for f, (tr, te) in enumerate(plan.split(groups)):
        if cfg.undersample:
            tr = tr[undersample_majority(ds.y[tr], cfg.seed + f)]
        pipe, table = _fit_binary(cfg, specs, ds.X[tr], ds.y[tr], groups[tr], cfg.seed + f, metric)
        p = pipe.predict_proba(ds.X[te])
        pred = (p >= 0.5).astype(int)
        wm = binary_metrics(ds.y[te], pred, p)
        subj = list(dict.fromkeys(groups[te]))
        s_truth = [int(ds.y[te][groups[te] == s].max()) for s in subj]
        s_call = [majority_vote(pred[groups[te] == s]) for s in subj]
        s_score = [float(p[groups[te] == s].mean()) for s in subj]
        sm = binary_metrics(s_truth, s_call, s_score)
        folds.append({"fold": f, "spec": pipe.spec.label, "n_train": int(tr.size), "window": wm.to_dict(),
                      "subject": sm.to_dict(), "grid": table})
        for i, wi in enumerate(te):
            rows.append((ds.window_ids[wi], groups[wi], f, repr(float(p[i])), int(pred[i]), int(ds.y[wi])))
        if cfg.save_bundles:
            d = save_bundle(pipe, out / "bundles" / f"fold{f}", {"fold": f, "phenotype": ds.phenotype.value,
                                                                  "config_hash": h})
            written.extend(sorted(d.iterdir()))
    keys = ("f1_pos", "f1_neg", "accuracy", "roc_auc", "auprc", "sensitivity", "specificity")
    metrics = {"task": "screening", "phenotype": ds.phenotype.value, "k": cfg.k,
               "window": {k: mean_std([fr["window"][k] for fr in folds]) for k in keys},
               "subject": {k: mean_std([fr["subject"][k] for fr in folds]) for k in keys},
               "folds": folds, "dataset": ds.manifest()}
    written.append(dump_json(out / "metrics.json", metrics, h))
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_id", "subject", "fold", "prob", "pred", "truth"])
        w.writerows(sorted(rows))
    written.append(out / "predictions.csv")
    return {"metrics": metrics, "plan": plan, "manifest": _finish(cfg, out, written)}


# ---------------------------------------------------------------- per-subject tasks

def _subject_cv(cfg: RunConfig, samples, out: Path, h: str, tag: str) -> dict:
    """Grouped CV over one-sample-per-subject data; metrics on the pooled predictions."""
    y = np.array([s.label for s in samples], dtype=int)
    if y.min() == y.max():
        raise DegenerateDataset(f"{tag}: all retained subjects share label {y[0]}; need both classes")
    X = np.vstack([s.features for s in samples])
    groups = np.array([s.subject_id for s in samples])
    k = min(cfg.k, int(min(np.sum(y == 0), np.sum(y == 1))))
    if k < 2:
        raise TooFewSubjects(f"{tag}: each class needs at least 2 subjects for cross-validation")
    plan = stratified_group_kfold(y, groups, k, cfg.seed)
    specs = specs_from_config(cfg)
    probs = np.zeros(y.size)
    folds = []
    for f, (tr, te) in enumerate(plan.split(groups)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pipe = fit_pipeline(specs[0], X[tr], y[tr], cfg.seed + f) if y[tr].min() != y[tr].max() else None
        probs[te] = pipe.predict_proba(X[te]) if pipe else float(y[tr].mean())
        folds.append({"fold": f, "test_subjects": sorted(groups[te].tolist())})
    m = binary_metrics(y, probs >= 0.5, probs).to_dict()
    return {"metrics": m, "plan": plan.to_dict(), "folds": folds, "spec": specs[0].label,
            "subjects": [{"subject": s.subject_id, "is_control": s.is_control, "label": s.label,
                          "prob": float(probs[i]), "n_windows": s.n_windows} for i, s in enumerate(samples)]}


def _load_series(cfg: RunConfig):
    if not cfg.pose_dir:
        raise InputError("this task needs raw keypoint CSVs (set 'pose_dir')")
    series = load_pose_dir(cfg.pose_dir)
    if not series:
        raise InputError(f"no keypoint CSV files in {cfg.pose_dir}")
    return group_by_subject(series)


def run_patient_binary(cfg: RunConfig, grouped=None) -> dict:
    grouped = _load_series(cfg) if grouped is None else grouped
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    fcfg = FeatureConfig(**cfg.feature)
    samples, excluded = [], []
    for sid in sorted(grouped):
        try:
            samples.append(build_symptom_enriched(grouped[sid], cfg.phenotype, fcfg))
        except SubjectExcluded:
            excluded.append(sid)
    res = _subject_cv(cfg, samples, out, h, f"patient_binary/{cfg.phenotype}")
    res.update({"task": "patient_binary", "phenotype": parse_phenotype(cfg.phenotype).value, "excluded": excluded})
    written = [dump_json(out / "metrics.json", res, h)]
    return {"metrics": res, "manifest": _finish(cfg, out, written)}


def run_condition(cfg: RunConfig, grouped=None) -> dict:
    grouped = _load_series(cfg) if grouped is None else grouped
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    fcfg = FeatureConfig(**cfg.feature)
    conditions = [Condition.parse(cfg.condition)] if cfg.condition else \
        [Condition.REST, Condition.POSTURE, Condition.ACTION]
    report = {"task": "condition", "phenotype": parse_phenotype(cfg.phenotype).value, "conditions": {}}
    for cond in conditions:
        samples = [s for sid in sorted(grouped)
                   if (s := stratify_by_condition(grouped[sid], cfg.phenotype, cond, fcfg)) is not None]
        try:
            report["conditions"][cond.value] = _subject_cv(cfg, samples, out, h, f"condition/{cond.value}")
        except DegenerateData as exc:
            report["conditions"][cond.value] = {"skipped": str(exc)}
    written = [dump_json(out / "metrics.json", report, h)]
    return {"metrics": report, "manifest": _finish(cfg, out, written)}


# ---------------------------------------------------------------- extraction and synthesis

def drop_report_path_for(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".drops.json")


def extract_features(series, csv_path, fcfg: FeatureConfig = FeatureConfig(), extra: dict | None = None,
                     config_hash: str | None = None) -> list[Path]:
    """Feature CSV, its manifest and a standalone drop report for a list of series."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    records, report = extract_cohort(series, fcfg)
    report_path = dump_json(drop_report_path_for(csv_path), report.to_dict(), config_hash)
    if not records:
        raise DegenerateDataset("no usable windows survived extraction; see the drop report")
    write_feature_csv(records, csv_path)
    meta = {"feature_config": asdict(fcfg), **(extra or {})}
    if config_hash:
        meta["config_hash"] = config_hash
    mpath = dump_json(manifest_path_for(csv_path), feature_manifest(records, report, meta))
    return [csv_path, mpath, report_path]


def cohort_config(d: dict | None) -> CohortConfig:
    d = dict(d or {})
    known = {f.name for f in fields(CohortConfig)}
    unknown = set(d) - known
    if unknown:
        raise InputError(f"unknown synth keys: {sorted(unknown)}")
    for k in ("sway_scale", "sway_band", "jitter_scale", "jitter_band"):
        if isinstance(d.get(k), list):
            d[k] = tuple(d[k])
    return CohortConfig(**d)


def run_synth(cfg: RunConfig, records=None) -> dict:
    """Synthetic cohort: keypoint CSVs under pose/, plus features.csv with manifest and drop report."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    ccfg = cohort_config(cfg.synth)
    series, manifest = generate_cohort(ccfg)
    written = write_cohort(series, manifest, out / "pose")
    written.append(out / "pose" / "cohort.json")
    written += extract_features(series, out / "features.csv", FeatureConfig(**cfg.feature),
                                {"source": "synth"}, h)
    return {"manifest": _finish(cfg, out, written), "cohort": manifest}


RUNNERS = {
    "synth": run_synth,
    "screening": run_screening,
    "multilabel": run_multilabel,
    "importance": run_importance,
    "patient_binary": run_patient_binary,
    "condition": run_condition,
}
