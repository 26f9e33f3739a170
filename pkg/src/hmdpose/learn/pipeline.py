"""Scaler -> selector -> classifier pipelines, grid search and bundle I/O."""
from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import CalibratedModel, platt_calibrate
from .models import MODEL_REGISTRY, make_model
from .scalers import Scaler, ScalerKind, fit_scaler
from .selection import select_k_best_mi
from ..taxonomy import N_FEATURES

BUNDLE_FORMAT = "hmdpose-bundle/1"

# comparators where a lower mean is better; every other one is maximized
MINIMIZED = frozenset({"clinical_cost", "hamming_loss", "error"})
COMPARATORS = ("f1_pos", "roc_auc", "macro_auc", "macro_auprc", "hamming", "jaccard", "clinical_cost")

DEFAULT_GRIDS = {
    "logreg": {"C": [0.3, 1.0, 3.0]},
    "knn": {"k": [5, 7, 9]},
    "trees": {"n_trees": [100, 200, 300]},
}


def _fmt(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return f"{v:g}"
    return str(v)


@dataclass(frozen=True)
class PipelineSpec:
    scaler: str = "standard"
    select_k: int | None = None
    model: str = "logreg"
    params: tuple = ()
    calibration: str = "none"
    class_weight: str | None = None

    def __post_init__(self):
        ScalerKind(self.scaler)
        if self.model not in MODEL_REGISTRY:
            raise ValueError(f"unknown model {self.model!r}")
        if self.calibration not in ("none", "platt"):
            raise ValueError(f"calibration must be 'none' or 'platt', got {self.calibration!r}")
        if self.select_k is not None and not 1 <= self.select_k <= N_FEATURES:
            raise ValueError(f"select_k must lie in [1, {N_FEATURES}]")
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def model_kwargs(self) -> dict:
        kw = self.param_dict
        if self.model == "logreg" and self.class_weight is not None:
            kw["class_weight"] = self.class_weight
        return kw

    @property
    def label(self) -> str:
        p = self.param_dict
        if self.model == "logreg":
            m = f"LogReg(C={_fmt(p.get('C', 1.0))},p=l2)"
        elif self.model == "knn":
            m = f"KNN(k={p.get('k', 5)},w={p.get('weights', 'uniform')},p={p.get('p', 2)})"
        else:
            m = (f"Trees(M={p.get('n_trees', 100)},depth={p.get('max_depth')},"
                 f"f={p.get('max_features', 'sqrt')})")
        sel = f"MI(k={self.select_k})" if self.select_k else "all"
        return f"{ScalerKind(self.scaler).label}|{sel}|{m}|{self.calibration}"

    def __str__(self) -> str:
        return self.label

    def to_dict(self) -> dict:
        return {"scaler": self.scaler, "select_k": self.select_k, "model": self.model,
                "params": self.param_dict, "calibration": self.calibration, "class_weight": self.class_weight}

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineSpec":
        return cls(d["scaler"], d.get("select_k"), d["model"], tuple(sorted(d.get("params", {}).items())),
                   d.get("calibration", "none"), d.get("class_weight"))


def expand_grid(scalers=("standard",), select_k=(None,), models=None, calibration=("none",),
                class_weight=None) -> list[PipelineSpec]:
    """Cartesian product of the options; ``models`` maps kind -> {param: values}."""
    models = models or {"logreg": DEFAULT_GRIDS["logreg"]}
    specs = []
    for kind, grid in models.items():
        keys = sorted(grid)
        for values in itertools.product(*(list(grid[k]) for k in keys)):
            for sc, k, cal in itertools.product(scalers, select_k, calibration):
                specs.append(PipelineSpec(sc, k, kind, tuple(zip(keys, values)), cal, class_weight))
    return sorted(set(specs), key=lambda s: s.label)


@dataclass
class Pipeline:
    """A fitted pipeline; ``selected`` holds indices into the original columns."""

    spec: PipelineSpec
    scaler: Scaler | None = None
    selected: np.ndarray | None = None
    model: object = None
    n_fit_rows: int = 0
    seed: int = 0

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.n_fit_rows = X.shape[0]
        self.scaler = fit_scaler(self.spec.scaler, X)
        Z = self.scaler.transform(X)
        if self.spec.select_k is not None:
            self.selected = select_k_best_mi(Z, y, self.spec.select_k)
        else:
            self.selected = np.arange(X.shape[1])
        Z = Z[:, self.selected]
        build = lambda: make_model(self.spec.model, **self.spec.model_kwargs())  # noqa: E731
        if self.spec.calibration == "platt":
            self.model = platt_calibrate(build, Z, y, seed=self.seed)
        else:
            self.model = build().fit(Z, y)
        return self

    def transform(self, X) -> np.ndarray:
        return self.scaler.transform(np.asarray(X, dtype=float))[:, self.selected]

    def predict_proba(self, X) -> np.ndarray:
        return np.clip(self.model.predict_proba(self.transform(X)), 0.0, 1.0)

    @property
    def base_model(self):
        return self.model.base if isinstance(self.model, CalibratedModel) else self.model

    def candidate_features(self) -> np.ndarray:
        """Original column indices the pipeline actually consumes."""
        return self.selected.copy()

    def feature_weights(self) -> np.ndarray | None:
        """Logistic coefficient per original column (0 for unselected), else None."""
        coef = getattr(self.base_model, "coef_", None)
        if coef is None:
            return None
        w = np.zeros(self.scaler.center.size)
        w[self.selected] = coef
        return w


def fit_pipeline(spec: PipelineSpec, X, y, seed: int = 0) -> Pipeline:
    return Pipeline(spec, seed=seed).fit(X, y)


def better(a: float, b: float, comparator: str) -> bool:
    return a < b if comparator in MINIMIZED else a > b


def grid_search(specs, evaluate_fn, comparator: str = "macro_auc", n_jobs: int = 1):
    """Exhaustive search; ``evaluate_fn(spec)`` returns the per-fold metric values.

    Returns (best spec, {label: mean}).  NaN folds are ignored in the mean;
    equal means resolve to the lexicographically smaller spec label.
    """
    specs = sorted(specs, key=lambda s: s.label)
    if not specs:
        raise ValueError("grid_search needs a nonempty grid")
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(evaluate_fn, specs))
    else:
        results = [evaluate_fn(s) for s in specs]
    table = {}
    best, best_val = None, None
    for spec, vals in zip(specs, results):
        vals = np.asarray(vals, dtype=float)
        mean = float(np.nanmean(vals)) if np.any(np.isfinite(vals)) else float("nan")
        table[spec.label] = mean
        if np.isnan(mean):
            continue
        if best is None or better(mean, best_val, comparator):
            best, best_val = spec, mean
    return (best or specs[0]), table


def save_bundle(pipe: Pipeline, directory, extra: dict | None = None) -> Path:
    """Directory bundle: spec.json plus one .npy per array (byte-stable)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    arrays = {f"scaler_{k}": v for k, v in pipe.scaler.arrays().items()}
    arrays["selected"] = pipe.selected
    model = pipe.base_model
    arrays.update({f"model_{k}": v for k, v in model.arrays().items()})
    cal = None
    if isinstance(pipe.model, CalibratedModel):
        cal = {"a": pipe.model.a, "b": pipe.model.b}
    meta = {"format": BUNDLE_FORMAT, "spec": pipe.spec.to_dict(), "label": pipe.spec.label,
            "model_params": model.params(), "calibration": cal, "seed": pipe.seed,
            "n_fit_rows": pipe.n_fit_rows, "arrays": sorted(arrays)}
    if extra:
        meta["extra"] = extra
    for name, arr in arrays.items():
        np.save(d / f"{name}.npy", np.asarray(arr), allow_pickle=False)
    (d / "spec.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return d


def load_bundle(directory) -> Pipeline:
    d = Path(directory)
    meta_path = d / "spec.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no model bundle at {d} (spec.json missing)")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"unsupported bundle format {meta.get('format')!r}")
    arrays = {name: np.load(d / f"{name}.npy", allow_pickle=False) for name in meta["arrays"]}
    spec = PipelineSpec.from_dict(meta["spec"])
    lambdas = arrays.get("scaler_lambdas")
    scaler = Scaler(ScalerKind(spec.scaler), arrays["scaler_center"], arrays["scaler_scale"], lambdas)
    cls = MODEL_REGISTRY[spec.model]
    model = cls.from_arrays(meta["model_params"],
                            {k[len("model_"):]: v for k, v in arrays.items() if k.startswith("model_")})
    if meta["calibration"] is not None:
        model = CalibratedModel(model, meta["calibration"]["a"], meta["calibration"]["b"])
    return Pipeline(spec, scaler, arrays["selected"].astype(np.int64), model, meta["n_fit_rows"], meta["seed"])
