"""Column scalers fitted on training rows only."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from ..features import sanitize


class ScalerKind(str, Enum):
    STANDARD = "standard"
    MINMAX = "minmax"
    ROBUST = "robust"
    POWER_YJ = "power_yj"

    @property
    def label(self) -> str:
        return {"standard": "Standard", "minmax": "MinMax", "robust": "Robust", "power_yj": "PowerYJ"}[self.value]


def yeo_johnson(x, lmbda: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    if abs(lmbda) < 1e-12:
        out[pos] = np.log1p(x[pos])
    else:
        out[pos] = np.expm1(lmbda * np.log1p(x[pos])) / lmbda
    if abs(lmbda - 2.0) < 1e-12:
        out[~pos] = -np.log1p(-x[~pos])
    else:
        out[~pos] = -np.expm1((2.0 - lmbda) * np.log1p(-x[~pos])) / (2.0 - lmbda)
    return out


def yeo_johnson_llf(x, lmbda: float) -> float:
    """Profile log-likelihood of a Gaussian fit to the transformed column."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        t = yeo_johnson(x, lmbda)
        var = np.var(t)
    if not np.isfinite(var) or var <= 0:
        return -np.inf
    return float(-0.5 * x.size * np.log(var) + (lmbda - 1.0) * np.sum(np.sign(x) * np.log1p(np.abs(x))))


def yeo_johnson_lambda(x, bounds=(-10.0, 10.0)) -> float:
    """Maximum-likelihood Yeo-Johnson exponent for one column."""
    x = np.asarray(x, dtype=float)
    if np.ptp(x) == 0:
        return 1.0
    res = minimize_scalar(lambda lm: -yeo_johnson_llf(x, lm), bounds=bounds, method="bounded",
                          options={"xatol": 1e-10, "maxiter": 500})
    return float(res.x)


@dataclass
class Scaler:
    """Per-column affine map (after an optional Yeo-Johnson step).

    A zero ``scale`` marks a degenerate column that maps to 0.
    """

    kind: ScalerKind
    center: np.ndarray
    scale: np.ndarray
    lambdas: np.ndarray | None = None

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.lambdas is not None:
            with np.errstate(over="ignore", invalid="ignore"):
                X = np.column_stack([yeo_johnson(X[:, j], lm) for j, lm in enumerate(self.lambdas)]) \
                    if X.shape[1] else X
        safe = np.where(self.scale == 0, 1.0, self.scale)
        out = (X - self.center) / safe
        out[:, self.scale == 0] = 0.0
        return sanitize(out)

    def arrays(self) -> dict[str, np.ndarray]:
        d = {"center": self.center, "scale": self.scale}
        if self.lambdas is not None:
            d["lambdas"] = self.lambdas
        return d


def fit_scaler(kind, X) -> Scaler:
    kind = ScalerKind(kind)
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on zero rows")
    lambdas = None
    if kind is ScalerKind.STANDARD:
        center, scale = X.mean(axis=0), X.std(axis=0)
    elif kind is ScalerKind.MINMAX:
        center = X.min(axis=0)
        scale = X.max(axis=0) - center
    elif kind is ScalerKind.ROBUST:
        q25, center, q75 = np.quantile(X, [0.25, 0.5, 0.75], axis=0)
        scale = q75 - q25
    else:
        lambdas = np.array([yeo_johnson_lambda(X[:, j]) for j in range(X.shape[1])])
        with np.errstate(over="ignore", invalid="ignore"):
            T = np.column_stack([yeo_johnson(X[:, j], lm) for j, lm in enumerate(lambdas)])
        T = sanitize(T)
        center, scale = T.mean(axis=0), T.std(axis=0)
    scale = np.where(np.isfinite(scale), scale, 0.0)
    # constant columns: float noise in std must not blow the column up
    scale[np.ptp(X, axis=0) == 0] = 0.0
    return Scaler(kind, center, scale, lambdas)


def apply_scaler(scaler: Scaler, X) -> np.ndarray:
    return scaler.transform(X)
