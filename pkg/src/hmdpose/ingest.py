"""Keypoint CSV ingestion, coordinate mapping, displacement channels, windowing.

CSV layout (UTF-8, header row, comma separated)::

    timestamp,frame,subject_id,is_control,condition,from,to,
    nose_x,nose_y,...,right_ankle_x,right_ankle_y,label_dystonia,...,label_tics

An optional first line ``# fps: 30`` carries the acquisition rate.  A JSON
sidecar next to the file (``<name>.json``) may override ``fps``,
``video_id`` and column names (``{"columns": {"timestamp": "t", ...}}``).
"""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    InputError,
    MalformedRow,
    MissingColumn,
    MultiPersonFrame,
    NonMonotonicTime,
    OutOfRange,
)
from .taxonomy import LANDMARKS, PHENOTYPES, Condition, Landmark

META_COLUMNS = ("timestamp", "frame", "subject_id", "is_control", "condition", "from", "to")
COORD_COLUMNS = tuple(f"{lm.value}_{axis}" for lm in LANDMARKS for axis in ("x", "y"))
LABEL_COLUMNS = tuple(f"label_{p.value}" for p in PHENOTYPES)
CSV_COLUMNS = META_COLUMNS + COORD_COLUMNS + LABEL_COLUMNS

_FPS_HEADER = re.compile(r"^#\s*fps\s*[:=]\s*([0-9.eE+-]+)\s*$")
_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


@dataclass
class PoseSeries:
    """One video of one subject: per-frame timestamps, 17 keypoints, annotations.

    ``coords`` has shape (T, 17, 2) in pixels with NaN for missing values;
    ``annotations`` has shape (T, 8) with raw rater values in {0, 1, 2}.
    ``row_bounds`` keeps the per-row (from, to) columns (NaN outside windows).
    """

    video_id: str
    subject_id: str
    is_control: bool
    fps: float
    timestamps: np.ndarray
    frame_index: np.ndarray
    coords: np.ndarray
    conditions: np.ndarray
    annotations: np.ndarray
    window_bounds: list[tuple[float, float]]
    row_bounds: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.timestamps)
        if not (self.fps > 0):
            raise InputError(f"fps must be positive, got {self.fps}")
        if self.coords.shape != (n, len(LANDMARKS), 2):
            raise InputError(f"coords shape {self.coords.shape} does not match {n} frames")
        if self.annotations.shape != (n, len(PHENOTYPES)):
            raise InputError("annotation matrix does not match frame count")
        if n > 1 and np.any(np.diff(self.timestamps) < 0):
            raise NonMonotonicTime(int(np.argmax(np.diff(self.timestamps) < 0)) + 1)
        if n > 1 and np.any(np.diff(self.frame_index) <= 0):
            raise MalformedRow(int(np.argmax(np.diff(self.frame_index) <= 0)) + 1,
                               "frame index not strictly increasing")
        if np.any((self.annotations < 0) | (self.annotations > 2)):
            raise MalformedRow(int(np.argmax(np.any((self.annotations < 0) | (self.annotations > 2), axis=1))),
                               "annotation outside {0,1,2}")
        for lo, hi in self.window_bounds:
            if not lo < hi:
                raise InputError(f"window bound ({lo}, {hi}) has from >= to")

    @property
    def n_frames(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class DisplacementChannel:
    landmark: Landmark
    samples: np.ndarray
    fs: float


@dataclass(frozen=True)
class Window:
    window_id: str
    index: int
    bounds: tuple[float, float]
    start: int
    stop: int
    raw_labels: tuple[frozenset, ...]
    condition: Condition
    short: bool = False

    @property
    def n_frames(self) -> int:
        return self.stop - self.start


@dataclass
class DropReport:
    """Counts of dropped or flagged windows by cause, plus the affected ids."""

    counts: Counter = field(default_factory=Counter)
    entries: list[tuple[str, str]] = field(default_factory=list)

    def add(self, cause: str, window_id: str) -> None:
        self.counts[cause] += 1
        self.entries.append((cause, window_id))

    def merge(self, other: "DropReport") -> None:
        self.counts.update(other.counts)
        self.entries.extend(other.entries)

    def to_dict(self) -> dict:
        by_cause: dict[str, list[str]] = {}
        for cause, wid in self.entries:
            by_cause.setdefault(cause, []).append(wid)
        return {"counts": dict(sorted(self.counts.items())), "windows": dict(sorted(by_cause.items()))}


def pixel_from_normalized(xn: float, yn: float, width: int, height: int) -> tuple[int, int]:
    """Map image-normalized coordinates to integer pixel coordinates by flooring."""
    if not (0.0 <= xn <= 1.0 and 0.0 <= yn <= 1.0):
        raise OutOfRange(f"normalized coordinates ({xn}, {yn}) outside [0, 1]")
    if width <= 0 or height <= 0:
        raise OutOfRange("frame dimensions must be positive")
    return math.floor(xn * width), math.floor(yn * height)


def displacement(series: PoseSeries, landmark: Landmark) -> DisplacementChannel:
    """Radial image-plane magnitude sqrt(x^2 + y^2); missing x or y gives NaN."""
    if series.n_frames == 0:
        raise InputError("empty series")
    xy = series.coords[:, Landmark(landmark).index, :]
    d = np.hypot(xy[:, 0], xy[:, 1])
    return DisplacementChannel(Landmark(landmark), d, series.fps)


def displacement_matrix(series: PoseSeries) -> np.ndarray:
    """All 17 channels as a (T, 17) array."""
    return np.hypot(series.coords[..., 0], series.coords[..., 1])


def cut_windows(series: PoseSeries, short_tolerance: float = 0.9) -> tuple[list[Window], DropReport]:
    """Split a series into its annotation-bounded windows.

    Membership is half-open, ``from <= timestamp < to``.  Windows with no
    frames are dropped as ``empty`` and single-frame windows as ``too_short``;
    windows holding fewer than ``short_tolerance`` of the nominal frame count
    are kept but flagged ``short``.
    """
    if not series.window_bounds:
        raise InputError(f"{series.video_id}: no window bounds present")
    report = DropReport()
    windows: list[Window] = []
    t = series.timestamps
    for k, (lo, hi) in enumerate(series.window_bounds):
        wid = f"{series.video_id}:w{k:04d}"
        start = int(np.searchsorted(t, lo, side="left"))
        stop = int(np.searchsorted(t, hi, side="left"))
        n = stop - start
        if n <= 0:
            report.add("empty", wid)
            continue
        if n < 2:
            report.add("too_short", wid)
            continue
        short = n < short_tolerance * (hi - lo) * series.fps
        if short:
            report.add("short", wid)
        ann = series.annotations[start:stop]
        raw = tuple(frozenset(int(v) for v in np.unique(ann[:, j])) for j in range(ann.shape[1]))
        conds = Counter(series.conditions[start:stop])
        condition = Condition(max(conds.items(), key=lambda kv: kv[1])[0])
        windows.append(Window(wid, k, (lo, hi), start, stop, raw, condition, short))
    return windows, report


# ---------------------------------------------------------------------------
# CSV reading / writing


def _read_sidecar(path: Path) -> dict:
    for candidate in (path.with_suffix(".json"), Path(str(path) + ".json")):
        if candidate.exists():
            with open(candidate, encoding="utf-8") as fh:
                return json.load(fh)
    return {}


def _parse_bool(value: str, line: int, path) -> bool:
    text = value.strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise MalformedRow(line, f"is_control value {value!r} is not boolean", path)


def _numeric(col: pd.Series) -> np.ndarray:
    text = col.str.strip()
    return pd.to_numeric(text.where(text != "", None), errors="coerce").to_numpy(dtype=float)


def load_pose_csv(path, schema: dict | None = None, fps: float | None = None,
                  video_id: str | None = None) -> PoseSeries:
    """Parse and validate one keypoint CSV file.

    ``schema`` maps canonical column names (see ``CSV_COLUMNS``) to the
    names used in the file.  Coordinate cells that are empty, ``NaN`` or
    otherwise non-numeric become NaN; every other violation raises with the
    offending line number.
    """
    path = Path(path)
    sidecar = _read_sidecar(path)
    columns = dict(sidecar.get("columns", {}))
    columns.update(schema or {})

    header_fps = None
    n_comment = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            n_comment += 1
            m = _FPS_HEADER.match(line.strip())
            if m:
                header_fps = float(m.group(1))

    raw = pd.read_csv(path, dtype=str, keep_default_na=False, skiprows=n_comment,
                      skipinitialspace=True)
    raw.columns = [c.strip() for c in raw.columns]
    lookup = {canon: columns.get(canon, canon) for canon in CSV_COLUMNS}
    for canon, actual in lookup.items():
        if actual not in raw.columns:
            raise MissingColumn(actual, path)
    first_line = n_comment + 2

    def line_of(i: int) -> int:
        return first_line + int(i)

    n = len(raw)
    ts = _numeric(raw[lookup["timestamp"]])
    bad = ~np.isfinite(ts)
    if bad.any():
        raise MalformedRow(line_of(np.argmax(bad)), "timestamp is not a finite number", path)
    if n > 1 and np.any(np.diff(ts) < 0):
        raise NonMonotonicTime(line_of(np.argmax(np.diff(ts) < 0) + 1), path)

    frames = _numeric(raw[lookup["frame"]])
    bad = ~np.isfinite(frames) | (frames != np.round(frames))
    if bad.any():
        raise MalformedRow(line_of(np.argmax(bad)), "frame index is not an integer", path)
    frames = frames.astype(np.int64)
    if n > 1:
        step = np.diff(frames)
        if np.any(step == 0):
            raise MultiPersonFrame(line_of(np.argmax(step == 0) + 1),
                                   "repeated frame index (more than one person per frame)", path)
        if np.any(step < 0):
            raise MalformedRow(line_of(np.argmax(step < 0) + 1), "frame index decreases", path)

    subjects = raw[lookup["subject_id"]].str.strip()
    if n == 0:
        raise MalformedRow(first_line, "file has no data rows", path)
    if (subjects != subjects.iloc[0]).any():
        raise MalformedRow(line_of(np.argmax((subjects != subjects.iloc[0]).to_numpy())),
                           "subject_id changes within one file", path)
    ctrl_values = raw[lookup["is_control"]].str.strip()
    is_control = _parse_bool(ctrl_values.iloc[0], first_line, path)
    for i, v in enumerate(ctrl_values):
        if _parse_bool(v, line_of(i), path) != is_control:
            raise MalformedRow(line_of(i), "is_control changes within one file", path)

    conditions = np.empty(n, dtype=object)
    for i, v in enumerate(raw[lookup["condition"]]):
        try:
            conditions[i] = Condition.parse(v).value
        except ValueError as exc:
            raise MalformedRow(line_of(i), str(exc), path) from None

    lo = _numeric(raw[lookup["from"]])
    hi = _numeric(raw[lookup["to"]])
    bad = np.isfinite(lo) != np.isfinite(hi)
    if bad.any():
        raise MalformedRow(line_of(np.argmax(bad)), "window bound half missing", path)
    bad = np.isfinite(lo) & ~(lo < hi)
    if bad.any():
        raise MalformedRow(line_of(np.argmax(bad)), "window bound with from >= to", path)
    bounds: list[tuple[float, float]] = []
    seen = set()
    for a, b in zip(lo, hi):
        if np.isfinite(a) and (a, b) not in seen:
            seen.add((a, b))
            bounds.append((float(a), float(b)))

    coords = np.empty((n, len(LANDMARKS), 2))
    for j, lm in enumerate(LANDMARKS):
        for a, axis in enumerate(("x", "y")):
            vals = _numeric(raw[lookup[f"{lm.value}_{axis}"]])
            vals[~np.isfinite(vals)] = np.nan
            neg = vals < 0
            if neg.any():
                raise MalformedRow(line_of(np.argmax(neg)), f"negative pixel coordinate in {lm.value}_{axis}", path)
            coords[:, j, a] = vals

    ann = np.zeros((n, len(PHENOTYPES)), dtype=np.int8)
    for j, canon in enumerate(LABEL_COLUMNS):
        text = raw[lookup[canon]].str.strip()
        vals = pd.to_numeric(text.where(text != "", "0"), errors="coerce").to_numpy(dtype=float)
        bad = ~np.isin(vals, (0.0, 1.0, 2.0))
        if bad.any():
            raise MalformedRow(line_of(np.argmax(bad)),
                               f"{lookup[canon]} value {text.iloc[int(np.argmax(bad))]!r} not in {{0,1,2}}", path)
        ann[:, j] = vals.astype(np.int8)

    rate = fps or sidecar.get("fps") or header_fps
    if rate is None:
        if n < 2 or ts[-1] <= ts[0]:
            raise InputError(f"{path}: cannot infer fps from fewer than two distinct timestamps")
        rate = (n - 1) / (ts[-1] - ts[0])

    return PoseSeries(
        video_id=video_id or sidecar.get("video_id") or path.stem,
        subject_id=str(subjects.iloc[0]),
        is_control=is_control,
        fps=float(rate),
        timestamps=ts,
        frame_index=frames,
        coords=coords,
        conditions=conditions,
        annotations=ann,
        window_bounds=bounds,
        row_bounds=np.column_stack([lo, hi]),
    )


def load_pose_dir(directory, pattern: str = "*.csv", **kwargs) -> list[PoseSeries]:
    paths = sorted(Path(directory).glob(pattern))
    if not paths:
        raise InputError(f"no pose files matching {pattern!r} in {directory}")
    return [load_pose_csv(p, **kwargs) for p in paths]


def _fmt(v: float, digits: int) -> str:
    if v is None or not np.isfinite(v):
        return ""
    return f"{v:.{digits}f}"


def write_pose_csv(series: PoseSeries, path, digits: int = 3) -> None:
    """Write a series in the ingest layout; output bytes depend only on the data."""
    path = Path(path)
    rb = series.row_bounds
    if rb is None:
        rb = np.full((series.n_frames, 2), np.nan)
        for lo, hi in series.window_bounds:
            inside = (series.timestamps >= lo) & (series.timestamps < hi)
            rb[inside] = (lo, hi)
    ctrl = "1" if series.is_control else "0"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# fps: {series.fps:g}\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(series.n_frames):
            parts = [
                f"{series.timestamps[i]:.6f}",
                str(int(series.frame_index[i])),
                series.subject_id,
                ctrl,
                str(series.conditions[i]),
                _fmt(rb[i, 0], 3),
                _fmt(rb[i, 1], 3),
            ]
            parts.extend(_fmt(v, digits) for v in series.coords[i].reshape(-1))
            parts.extend(str(int(v)) for v in series.annotations[i])
            fh.write(",".join(parts) + "\n")
