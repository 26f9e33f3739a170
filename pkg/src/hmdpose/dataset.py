"""Window records and the task datasets built from them.

Window labels use the raw annotation semantics: 0 absent, 1 present, 2
uncertain (the window is excluded from that phenotype's task).
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import DegenerateDataset, InputError, MissingColumn, SkippedWindow, SubjectExcluded
from .features import FeatureConfig, feature_vector
from .ingest import DropReport, PoseSeries, cut_windows, displacement_matrix
from .taxonomy import FEATURE_COLUMNS, N_FEATURES, PHENOTYPES, Condition, Phenotype, parse_phenotype

EXCLUDED = 2
LABEL_COLUMNS = [f"label_{p.value}" for p in PHENOTYPES]


def window_label(raw_values: Iterable[int]) -> int:
    """Any-positive rule with uncertainty exclusion: 2 if any 2, else 1 if any 1, else 0."""
    values = set(int(v) for v in raw_values)
    if not values:
        raise ValueError("window has no annotation values")
    if EXCLUDED in values:
        return EXCLUDED
    return 1 if 1 in values else 0


@dataclass
class WindowRecord:
    window_id: str
    subject_id: str
    is_control: bool
    condition: Condition
    features: np.ndarray
    labels: np.ndarray  # (8,), values in {0, 1, 2}
    video_id: str = ""

    def label(self, phenotype) -> int:
        return int(self.labels[parse_phenotype(phenotype).index])


def _window_is_complete(block: np.ndarray, max_missing_fraction: float) -> bool:
    missing = (~np.isfinite(block)).sum(axis=0)
    limit = max_missing_fraction * block.shape[0]
    return bool(np.all((missing == 0) | (missing <= limit)))


def extract_series(series: PoseSeries, config: FeatureConfig = FeatureConfig()
                   ) -> tuple[list[WindowRecord], DropReport]:
    """Cut a series into windows and compute the 374 features of each."""
    windows, report = cut_windows(series)
    disp = displacement_matrix(series)
    records = []
    for w in windows:
        block = disp[w.start:w.stop]
        if not _window_is_complete(block, config.max_missing_fraction):
            report.add("missing", w.window_id)
            continue
        try:
            values = feature_vector(block, series.fps, config)
        except SkippedWindow:
            report.add("skipped", w.window_id)
            continue
        labels = np.array([window_label(v) for v in w.raw_labels], dtype=np.int8)
        records.append(WindowRecord(w.window_id, series.subject_id, series.is_control,
                                    w.condition, values, labels, series.video_id))
    return records, report


def extract_cohort(series_list: Sequence[PoseSeries], config: FeatureConfig = FeatureConfig()
                   ) -> tuple[list[WindowRecord], DropReport]:
    records: list[WindowRecord] = []
    report = DropReport()
    for s in series_list:
        r, d = extract_series(s, config)
        records.extend(r)
        report.merge(d)
    return records, report


# ---------------------------------------------------------------------------
# Task datasets


@dataclass
class ScreeningDataset:
    phenotype: Phenotype
    X: np.ndarray
    y: np.ndarray
    subject_ids: np.ndarray
    is_control: np.ndarray
    window_ids: list[str]
    drops: Counter = field(default_factory=Counter)

    def manifest(self) -> dict:
        return {
            "task": "screening",
            "phenotype": self.phenotype.value,
            "n_rows": int(len(self.y)),
            "class_counts": {"0": int((self.y == 0).sum()), "1": int((self.y == 1).sum())},
            "drops": dict(sorted(self.drops.items())),
            "subjects": _roster(self.subject_ids, self.is_control),
        }


def _roster(subject_ids, is_control) -> dict:
    roster: dict[str, dict] = {}
    for sid, ctrl in zip(subject_ids, is_control):
        entry = roster.setdefault(str(sid), {"is_control": bool(ctrl), "n_rows": 0})
        entry["n_rows"] += 1
    return dict(sorted(roster.items()))


def build_screening(records: Sequence[WindowRecord], phenotype) -> ScreeningDataset:
    """Symptomatic patient windows (1) against control windows (0).

    A window is kept iff its label is 1 or its subject is a control; windows
    uncertain for the phenotype are never kept.
    """
    ph = parse_phenotype(phenotype)
    keep, y, drops = [], [], Counter()
    for i, r in enumerate(records):
        lab = r.label(ph)
        if lab == EXCLUDED:
            drops["uncertain"] += 1
        elif lab == 1 or r.is_control:
            keep.append(i)
            y.append(lab)
        else:
            drops["patient_negative"] += 1
    y = np.array(y, dtype=np.int8)
    if (y == 0).sum() == 0 or (y == 1).sum() == 0:
        raise DegenerateDataset(
            f"screening set for {ph.value} has {(y == 1).sum()} positive and {(y == 0).sum()} negative "
            "windows; both control windows and symptomatic patient windows are required")
    rows = [records[i] for i in keep]
    return ScreeningDataset(
        ph,
        np.vstack([r.features for r in rows]),
        y,
        np.array([r.subject_id for r in rows], dtype=object),
        np.array([r.is_control for r in rows]),
        [r.window_id for r in rows],
        drops,
    )


@dataclass
class MultiLabelDataset:
    """Windows x labels.  ``mask[i, l]`` is False where window i is uncertain for label l."""

    X: np.ndarray
    Y: np.ndarray
    mask: np.ndarray
    subject_ids: np.ndarray
    is_control: np.ndarray
    window_ids: list[str]
    labels: list[Phenotype]
    subject_or_labels: dict[str, np.ndarray]
    drops: Counter = field(default_factory=Counter)

    @property
    def label_names(self) -> list[str]:
        return [p.value for p in self.labels]

    @property
    def subjects(self) -> list[str]:
        return list(self.subject_or_labels)

    def subject_is_control(self) -> dict[str, bool]:
        return {str(s): bool(c) for s, c in zip(self.subject_ids, self.is_control)}

    def manifest(self) -> dict:
        return {
            "task": "multilabel",
            "labels": [p.value for p in self.labels],
            "n_rows": int(self.X.shape[0]),
            "positives_per_label": {p.value: int(self.Y[:, j].sum()) for j, p in enumerate(self.labels)},
            "masked_per_label": {p.value: int((~self.mask[:, j]).sum()) for j, p in enumerate(self.labels)},
            "subject_positives_per_label": {
                p.value: int(sum(v[j] for v in self.subject_or_labels.values()))
                for j, p in enumerate(self.labels)},
            "drops": dict(sorted(self.drops.items())),
            "subjects": _roster(self.subject_ids, self.is_control),
        }


def subject_or(Y: np.ndarray, subject_ids) -> dict[str, np.ndarray]:
    """Element-wise OR of label rows per subject, in first-appearance order."""
    out: dict[str, np.ndarray] = {}
    for row, sid in zip(Y, subject_ids):
        sid = str(sid)
        out[sid] = np.maximum(out[sid], row) if sid in out else row.astype(np.int8).copy()
    return out


def build_multilabel(records: Sequence[WindowRecord], include_all_zero: bool = True,
                     labels: Sequence | None = None) -> MultiLabelDataset:
    """Multi-label corpus over ``labels`` (default: all eight phenotypes).

    Uncertain entries are masked per label; the window still serves the other
    labels.  With ``include_all_zero=False`` windows whose label vector is all
    zero (which includes every control window) are dropped.
    """
    phens = [parse_phenotype(p) for p in (labels or PHENOTYPES)]
    cols = [p.index for p in phens]
    X, Y, M, keep = [], [], [], []
    drops = Counter()
    for r in records:
        lab = r.labels[cols]
        mask = lab != EXCLUDED
        y = np.where(mask, lab, 0).astype(np.int8)
        if not mask.all():
            drops["uncertain_entries"] += int((~mask).sum())
        if not include_all_zero and not y.any():
            drops["all_zero"] += 1
            continue
        X.append(r.features)
        Y.append(y)
        M.append(mask)
        keep.append(r)
    if not keep:
        raise DegenerateDataset("multi-label corpus is empty")
    Y = np.vstack(Y)
    sids = np.array([r.subject_id for r in keep], dtype=object)
    return MultiLabelDataset(
        np.vstack(X), Y, np.vstack(M), sids, np.array([r.is_control for r in keep]),
        [r.window_id for r in keep], phens, subject_or(Y, sids), drops)


@dataclass
class SubjectSample:
    subject_id: str
    is_control: bool
    label: int
    features: np.ndarray
    n_windows: int
    n_frames: int
    condition: Condition | None = None


def _retained_blocks(series_list, keep_window, config: FeatureConfig):
    blocks = []
    for s in series_list:
        windows, _ = cut_windows(s)
        disp = displacement_matrix(s)
        for w in windows:
            block = disp[w.start:w.stop]
            if not _window_is_complete(block, config.max_missing_fraction):
                continue
            if keep_window(s, w):
                blocks.append((s, w, block))
    return blocks


def _as_list(series) -> list[PoseSeries]:
    items = [series] if isinstance(series, PoseSeries) else list(series)
    if len({s.subject_id for s in items}) != 1:
        raise InputError("all series passed for one subject must share the subject_id")
    return items


def build_symptom_enriched(series, phenotype, config: FeatureConfig = FeatureConfig()) -> SubjectSample:
    """One feature vector per subject from its concatenated retained windows.

    Controls keep every window; patients keep the windows positive for the
    phenotype.  Uncertain windows are always dropped.  Label is 0 for
    controls and 1 for patients.
    """
    items = _as_list(series)
    ph = parse_phenotype(phenotype)
    head = items[0]

    def keep(s, w):
        lab = window_label(w.raw_labels[ph.index])
        if lab == EXCLUDED:
            return False
        return s.is_control or lab == 1

    blocks = _retained_blocks(items, keep, config)
    if not blocks:
        raise SubjectExcluded(f"subject {head.subject_id} has no retained windows for {ph.value}")
    merged = np.vstack([b for _, _, b in blocks])
    values = feature_vector(merged, head.fps, config)
    return SubjectSample(head.subject_id, head.is_control, 0 if head.is_control else 1,
                         values, len(blocks), merged.shape[0])


def stratify_by_condition(series, phenotype, condition, config: FeatureConfig = FeatureConfig()
                          ) -> SubjectSample | None:
    """Merged per-subject sample over the windows recorded under ``condition``.

    Returns None when the subject has no such windows or when the merged
    frames contain an uncertain annotation for the phenotype.
    """
    items = _as_list(series)
    ph = parse_phenotype(phenotype)
    cond = condition if isinstance(condition, Condition) else Condition.parse(condition)
    blocks = _retained_blocks(items, lambda s, w: w.condition == cond, config)
    if not blocks:
        return None
    raw = set()
    for _, w, _ in blocks:
        raw |= w.raw_labels[ph.index]
    lab = window_label(raw)
    if lab == EXCLUDED:
        return None
    merged = np.vstack([b for _, _, b in blocks])
    head = items[0]
    values = feature_vector(merged, head.fps, config)
    return SubjectSample(head.subject_id, head.is_control, lab, values, len(blocks),
                         merged.shape[0], cond)


def group_by_subject(series_list: Sequence[PoseSeries]) -> dict[str, list[PoseSeries]]:
    out: dict[str, list[PoseSeries]] = {}
    for s in series_list:
        out.setdefault(s.subject_id, []).append(s)
    return out


# ---------------------------------------------------------------------------
# Feature CSV


def _fmt(v: float) -> str:
    return repr(float(v))


def write_feature_csv(records: Sequence[WindowRecord], path) -> None:
    """``window_id,subject_id,condition,label_* x8,<374 features>``; floats round-trip exactly."""
    header = ["window_id", "subject_id", "condition", *LABEL_COLUMNS, *FEATURE_COLUMNS]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in records:
            parts = [r.window_id, r.subject_id, r.condition.value]
            parts += [str(int(v)) for v in r.labels]
            parts += [_fmt(v) for v in r.features]
            fh.write(",".join(parts) + "\n")


def feature_manifest(records: Sequence[WindowRecord], report: DropReport, extra: dict | None = None) -> dict:
    subjects: dict[str, dict] = {}
    for r in records:
        entry = subjects.setdefault(r.subject_id, {"is_control": bool(r.is_control), "n_windows": 0,
                                                   "videos": []})
        entry["n_windows"] += 1
        if r.video_id and r.video_id not in entry["videos"]:
            entry["videos"].append(r.video_id)
    out = {
        "n_windows": len(records),
        "n_features": N_FEATURES,
        "drop_report": report.to_dict(),
        "subjects": dict(sorted(subjects.items())),
    }
    out.update(extra or {})
    return out


def manifest_path_for(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".manifest.json")


def read_feature_csv(path, manifest: dict | None = None) -> list[WindowRecord]:
    """Load a feature CSV; control flags come from its manifest's subject roster."""
    path = Path(path)
    if manifest is None:
        mpath = manifest_path_for(path)
        if not mpath.exists():
            raise InputError(f"feature manifest {mpath} not found (control flags live there)")
        with open(mpath, encoding="utf-8") as fh:
            manifest = json.load(fh)
    roster = manifest["subjects"]
    df = pd.read_csv(path, dtype={"window_id": str, "subject_id": str, "condition": str},
                     float_precision="round_trip")
    for col in ["window_id", "subject_id", "condition", *LABEL_COLUMNS, *FEATURE_COLUMNS]:
        if col not in df.columns:
            raise MissingColumn(col, path)
    X = df[FEATURE_COLUMNS].to_numpy(dtype=float)
    L = df[LABEL_COLUMNS].to_numpy(dtype=np.int8)
    records = []
    for i, (wid, sid, cond) in enumerate(zip(df["window_id"], df["subject_id"], df["condition"])):
        if sid not in roster:
            raise InputError(f"subject {sid} missing from feature manifest")
        records.append(WindowRecord(wid, sid, bool(roster[sid]["is_control"]), Condition.parse(cond),
                                    X[i], L[i], wid.rsplit(":", 1)[0]))
    return records
