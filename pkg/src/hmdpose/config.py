"""Run configuration: one YAML file fully determines a run together with its inputs."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

TASKS = ("screening", "patient_binary", "condition", "multilabel", "importance", "synth")


def _default_grid() -> dict:
    return {
        "scalers": ["standard"],
        "select_k": [None],
        "models": {"logreg": {"C": [0.3, 1.0, 3.0]}},
        "calibration": ["none"],
        "class_weight": "balanced",
    }


def _default_threshold() -> dict:
    return {"alpha": 0.5, "constraints": {"max_control_fp": 0, "max_control_fpr": None, "min_specificity": None},
            "alpha_overrides": {}, "constraint_overrides": {}}


def _default_importance() -> dict:
    return {"enabled": False, "repeats": 5, "max_features": 50, "stability_min_folds": 2}


@dataclass
class RunConfig:
    task: str = "multilabel"
    features: str | None = None
    pose_dir: str | None = None
    output_dir: str = "runs/out"
    bundle_dir: str | None = None
    k: int = 5
    inner_k: int = 3
    seed: int = 42
    pooling: str = "p90"
    threshold: dict = field(default_factory=_default_threshold)
    threshold_source: str = "oof"
    grid: dict = field(default_factory=_default_grid)
    comparator: str = "macro_auc"
    labels: list | None = None
    include_all_zero: bool = True
    phenotype: str = "tremor"
    condition: str | None = None
    undersample: bool = True
    importance: dict = field(default_factory=_default_importance)
    feature: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)
    save_bundles: bool = True

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.threshold_source not in ("oof", "in_sample"):
            raise ValueError("threshold_source must be 'oof' or 'in_sample'")
        self.threshold = {**_default_threshold(), **(self.threshold or {})}
        self.importance = {**_default_importance(), **(self.importance or {})}
        self.grid = {**_default_grid(), **(self.grid or {})}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True), encoding="utf-8")

    def hash(self) -> str:
        """sha256 over the canonical JSON of every field except the output location."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
