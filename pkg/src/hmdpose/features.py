"""Per-window descriptors of landmark displacement signals.

Each landmark channel yields 22 values (19 primary descriptors plus three
rolling-mean summaries), so one window maps to a 374-dimensional vector laid
out landmark-major in ``taxonomy.FEATURE_COLUMNS`` order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SkippedWindow
from .taxonomy import FEATURE_COLUMNS, LANDMARKS, METRICS, N_FEATURES, Condition

EPS = 1e-12
INF_CLIP = 1e15


def first_diff(s) -> np.ndarray:
    """s(t) - s(t-1) with a zero prepended for t = 0."""
    s = np.asarray(s, dtype=float)
    return np.diff(s, prepend=s[:1])


def accel_mag(s) -> np.ndarray:
    """Absolute second difference |ds(t) - ds(t-1)|, zero-prepended twice."""
    return np.abs(first_diff(first_diff(s)))


def distributional(s, ddof: int = 0) -> dict[str, float]:
    """Amplitude and shape statistics.

    ``ddof=0`` gives the population standard deviation; quantiles use linear
    interpolation between order statistics.  Zero-variance input has
    std, var, skew and kurtosis equal to 0.
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    mean = s.mean()
    lo, hi = s.min(), s.max()
    q25, med, q75 = np.quantile(s, [0.25, 0.5, 0.75])
    if hi == lo:
        std = var = skew = kurt = 0.0
    else:
        dev = s - mean
        m2 = np.mean(dev ** 2)
        var = m2 * n / (n - ddof)
        std = np.sqrt(var)
        skew = np.mean(dev ** 3) / m2 ** 1.5
        kurt = np.mean(dev ** 4) / m2 ** 2 - 3.0
    return {
        "mean": float(mean),
        "std": float(std),
        "var": float(var),
        "median": float(med),
        "min": float(lo),
        "max": float(hi),
        "range": float(hi - lo),
        "iqr": float(q75 - q25),
        "energy": float(np.dot(s, s)),
        "skew": float(skew),
        "kurtosis": float(kurt),
    }


def trend_slope(s) -> float:
    """Ordinary least-squares slope against t = 0..N-1 (units per frame)."""
    s = np.asarray(s, dtype=float)
    t = np.arange(s.size, dtype=float)
    t -= t.mean()
    return float(np.dot(t, s - s.mean()) / np.dot(t, t))


def zero_crossings(s) -> int:
    """Number of strict sign reversals between consecutive first differences."""
    d = np.diff(np.asarray(s, dtype=float))
    return int(np.count_nonzero(d[:-1] * d[1:] < 0))


def fft_peak(s, fs: float, detrend: bool = False) -> tuple[float, float]:
    """Dominant non-DC spectral component as (frequency in Hz, magnitude).

    Only bins 1..N//2 are searched.  Bins within rounding noise of the maximum
    count as tied and the lowest frequency wins, so a constant input returns
    (fs / N, 0).
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    if n < 2:
        raise ValueError("fft_peak needs at least two samples")
    if detrend:
        t = np.arange(n, dtype=float)
        s = s - np.polyval(np.polyfit(t, s, 1), t)
    if np.ptp(s) == 0:
        return float(fs / n), 0.0
    amp = np.abs(np.fft.rfft(s))[1: n // 2 + 1]
    tol = 64 * np.finfo(float).eps * np.sum(np.abs(s))
    k = int(np.flatnonzero(amp >= amp.max() - tol)[0])
    return float((k + 1) * fs / n), float(amp[k])


def hist_entropy(s, bins: int = 10) -> float:
    """Shannon entropy (nats) of a fixed-bin histogram over the observed range."""
    s = np.asarray(s, dtype=float)
    if np.ptp(s) == 0:
        return 0.0
    counts, _ = np.histogram(s, bins=bins)
    p = counts / counts.sum()
    return _entropy(p)


def _entropy(p: np.ndarray) -> float:
    # the epsilon makes a point mass score -1e-12; clamp to the true lower bound
    return max(0.0, float(-np.sum(p * np.log(p + EPS))))


def higuchi_fd(s, kmax: int = 5) -> float:
    """Higuchi fractal dimension.

    Curve lengths use the (N-1) / (floor((N-m)/k) * k) normalization and the
    dimension is the negative log-log slope of mean length against k.  ``kmax``
    shrinks to N // 2 on short inputs; scales with zero length are left out of
    the fit, and 1.0 is returned when fewer than two scales remain.
    """
    x = np.asarray(s, dtype=float)
    n = x.size
    kmax = min(kmax, n // 2)
    ks, lengths = [], []
    for k in range(1, kmax + 1):
        lm = np.empty(k)
        for m in range(k):
            seg = x[m::k]
            n_inc = seg.size - 1
            lm[m] = np.abs(np.diff(seg)).sum() * (n - 1) / (n_inc * k) / k
        length = lm.mean()
        if length > 0:
            ks.append(k)
            lengths.append(length)
    if len(ks) < 2:
        return 1.0
    slope = np.polyfit(np.log(ks), np.log(lengths), 1)[0]
    return float(-slope)


def ordinal_patterns(s, order: int = 3, delay: int = 1) -> np.ndarray:
    """Rank pattern of each embedding vector; ties keep index order."""
    x = np.asarray(s, dtype=float)
    n_vec = x.size - (order - 1) * delay
    if n_vec <= 0:
        return np.empty((0, order), dtype=np.int64)
    idx = np.arange(n_vec)[:, None] + delay * np.arange(order)[None, :]
    return np.argsort(x[idx], axis=1, kind="stable")


def perm_entropy(s, order: int = 3, delay: int = 1) -> float:
    """Unnormalized permutation entropy in nats."""
    pats = ordinal_patterns(s, order, delay)
    if pats.shape[0] == 0:
        return 0.0
    codes = pats @ (order ** np.arange(order))
    _, counts = np.unique(codes, return_counts=True)
    return _entropy(counts / counts.sum())


def rolling_means(s, widths=(3, 5, 7)) -> dict[str, float]:
    """Time average of centered rolling means (edges truncated, min_periods=1)."""
    x = np.asarray(s, dtype=float)
    n = x.size
    csum = np.concatenate([[0.0], np.cumsum(x)])
    t = np.arange(n)
    out = {}
    for w in widths:
        half = w // 2
        lo = np.maximum(t - half, 0)
        hi = np.minimum(t + half + 1, n)
        out[f"rollmean_{w}"] = float(np.mean((csum[hi] - csum[lo]) / (hi - lo)))
    return out


def channel_features(s, fs: float, *, ddof: int = 0, detrend_fft: bool = False,
                     kmax: int = 5, pe_order: int = 3, pe_delay: int = 1) -> dict[str, float]:
    """All 22 descriptors of one displacement channel."""
    s = np.asarray(s, dtype=float)
    if s.size < 2:
        raise SkippedWindow(f"channel has {s.size} samples, need at least 2")
    feats = distributional(s, ddof=ddof)
    feats["slope"] = trend_slope(s)
    feats["zero_cross"] = float(zero_crossings(s))
    feats["mean_abs_accel"] = float(accel_mag(s).mean())
    feats["fft_peak_freq"], feats["fft_peak_amp"] = fft_peak(s, fs, detrend=detrend_fft)
    feats["hist_entropy"] = hist_entropy(s)
    feats["higuchi_fd"] = higuchi_fd(s, kmax)
    feats["perm_entropy"] = perm_entropy(s, pe_order, pe_delay)
    feats.update(rolling_means(s))
    return {m: feats[m] for m in METRICS}


def sanitize(values: np.ndarray) -> np.ndarray:
    """NaN -> 0 and +/-inf -> +/-1e15."""
    return np.nan_to_num(np.asarray(values, dtype=float), nan=0.0, posinf=INF_CLIP, neginf=-INF_CLIP)


@dataclass(frozen=True)
class FeatureConfig:
    ddof: int = 0
    detrend_fft: bool = False
    kmax: int = 5
    pe_order: int = 3
    pe_delay: int = 1
    max_missing_fraction: float = 0.0


@dataclass
class WindowFeatures:
    window_id: str
    subject_id: str
    condition: Condition
    values: np.ndarray
    labels: np.ndarray | None = None
    names: list[str] = field(default_factory=lambda: list(FEATURE_COLUMNS))

    def __post_init__(self):
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got {self.values.shape}")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def feature_vector(channels: np.ndarray, fs: float, config: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """374-vector from a (N, 17) block of displacement samples.

    Missing samples are removed per channel before computing descriptors; a
    channel with fewer than two present samples, or more missing than
    ``config.max_missing_fraction`` allows, raises SkippedWindow.
    """
    channels = np.asarray(channels, dtype=float)
    if channels.ndim != 2 or channels.shape[1] != len(LANDMARKS):
        raise ValueError(f"expected (N, {len(LANDMARKS)}) channels, got {channels.shape}")
    n = channels.shape[0]
    out = np.empty(N_FEATURES)
    width = len(METRICS)
    for j in range(len(LANDMARKS)):
        col = channels[:, j]
        present = np.isfinite(col)
        missing = n - int(present.sum())
        if missing and missing > config.max_missing_fraction * n:
            raise SkippedWindow(f"{LANDMARKS[j].value}: {missing}/{n} samples missing")
        feats = channel_features(col[present], fs, ddof=config.ddof, detrend_fft=config.detrend_fft,
                                 kmax=config.kmax, pe_order=config.pe_order, pe_delay=config.pe_delay)
        out[j * width:(j + 1) * width] = [feats[m] for m in METRICS]
    return sanitize(out)


def extract_window(channels, window_id: str = "", subject_id: str = "",
                   condition: Condition = Condition.UNSPECIFIED, fs: float | None = None,
                   config: FeatureConfig = FeatureConfig()) -> WindowFeatures:
    """Features of one window given its 17 DisplacementChannels (or an (N,17) array)."""
    if isinstance(channels, np.ndarray):
        block = channels
        if fs is None:
            raise ValueError("fs is required with a raw sample block")
    else:
        channels = list(channels)
        if len(channels) != len(LANDMARKS):
            raise ValueError(f"need {len(LANDMARKS)} channels, got {len(channels)}")
        by_landmark = {c.landmark: c for c in channels}
        block = np.column_stack([by_landmark[lm].samples for lm in LANDMARKS])
        fs = fs or channels[0].fs
    values = feature_vector(block, fs, config)
    return WindowFeatures(window_id, subject_id, condition, values)
