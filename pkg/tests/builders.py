"""Small constructors for hand-made pose series and CSV files."""
import numpy as np

from hmdpose.ingest import CSV_COLUMNS, PoseSeries, write_pose_csv
from hmdpose.taxonomy import LANDMARKS, PHENOTYPES, Phenotype


def make_series(n_windows=3, window_s=2.0, fs=30.0, subject="P001", control=False, labels=None,
                condition="Rest", coords_fn=None, seed=0, video=None):
    """Series of back-to-back windows; ``labels`` maps window index -> {phenotype: value}."""
    rng = np.random.default_rng(seed)
    per = int(round(window_s * fs))
    n = per * n_windows
    t = np.arange(n) / fs
    coords = 100 + rng.normal(0, 1, size=(n, len(LANDMARKS), 2))
    if coords_fn is not None:
        coords = coords_fn(t, coords)
    ann = np.zeros((n, len(PHENOTYPES)), dtype=np.int8)
    for w, per_label in (labels or {}).items():
        for ph, v in per_label.items():
            ann[w * per:(w + 1) * per, Phenotype(ph).index] = v
    conds = condition if isinstance(condition, (list, tuple)) else [condition] * n_windows
    conditions = np.repeat(np.array(conds, dtype=object), per)
    bounds = [(w * window_s, (w + 1) * window_s) for w in range(n_windows)]
    return PoseSeries(video or f"{subject}_v0", subject, control, fs, t, np.arange(n), coords,
                      conditions, ann, bounds)


def write_csv(series, path, digits=3):
    write_pose_csv(series, path, digits=digits)
    return path


def rows_csv(path, rows, header=CSV_COLUMNS, comment=None):
    """Write a raw CSV from dict rows (missing keys become 0)."""
    lines = [] if comment is None else [comment]
    lines.append(",".join(header))
    for r in rows:
        lines.append(",".join(str(r.get(c, 0)) for c in header))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def raw_row(t, frame, subject="P001", control=0, lo=0.0, hi=10.0, **extra):
    r = {"timestamp": t, "frame": frame, "subject_id": subject, "is_control": control,
         "condition": "Rest", "from": lo, "to": hi}
    for lm in LANDMARKS:
        r[f"{lm.value}_x"] = 100
        r[f"{lm.value}_y"] = 100
    r.update(extra)
    return r
