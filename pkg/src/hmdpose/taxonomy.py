"""Landmarks, phenotypes, descriptor names and their clinical groupings."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Region(str, Enum):
    CRANIAL = "Cranial"
    UPPER_LIMB = "UpperLimb"
    LOWER_LIMB = "LowerLimb"


class Landmark(str, Enum):
    # COCO keypoint order; CSV columns and feature vectors follow it.
    NOSE = "nose"
    LEFT_EYE = "left_eye"
    RIGHT_EYE = "right_eye"
    LEFT_EAR = "left_ear"
    RIGHT_EAR = "right_ear"
    LEFT_SHOULDER = "left_shoulder"
    RIGHT_SHOULDER = "right_shoulder"
    LEFT_ELBOW = "left_elbow"
    RIGHT_ELBOW = "right_elbow"
    LEFT_WRIST = "left_wrist"
    RIGHT_WRIST = "right_wrist"
    LEFT_HIP = "left_hip"
    RIGHT_HIP = "right_hip"
    LEFT_KNEE = "left_knee"
    RIGHT_KNEE = "right_knee"
    LEFT_ANKLE = "left_ankle"
    RIGHT_ANKLE = "right_ankle"

    @property
    def region(self) -> Region:
        base = self.value.split("_")[-1]
        if base in ("nose", "eye", "ear"):
            return Region.CRANIAL
        if base in ("shoulder", "elbow", "wrist"):
            return Region.UPPER_LIMB
        return Region.LOWER_LIMB

    @property
    def index(self) -> int:
        return LANDMARKS.index(self)


LANDMARKS = list(Landmark)


class Phenotype(str, Enum):
    DYSTONIA = "dystonia"
    TREMOR = "tremor"
    MYOCLONUS = "myoclonus"
    CHOREA = "chorea"
    ATHETOSIS = "athetosis"
    BALLISMUS = "ballismus"
    STEREOTYPIES = "stereotypies"
    TICS = "tics"

    @property
    def index(self) -> int:
        return PHENOTYPES.index(self)


PHENOTYPES = list(Phenotype)


def parse_phenotype(name) -> Phenotype:
    if isinstance(name, Phenotype):
        return name
    key = str(name).strip().lower()
    if key.startswith("label_"):
        key = key[len("label_"):]
    return Phenotype(key)


class Condition(str, Enum):
    REST = "Rest"
    POSTURE = "Posture"
    ACTION = "Action"
    UNSPECIFIED = "Unspecified"

    @classmethod
    def parse(cls, value) -> "Condition":
        if value is None:
            return cls.UNSPECIFIED
        text = str(value).strip()
        if not text or text.lower() == "nan":
            return cls.UNSPECIFIED
        for member in cls:
            if member.value.lower() == text.lower():
                return member
        raise ValueError(f"unknown condition {value!r}")


class Family(str, Enum):
    BASELINE_POSTURE = "BaselinePosture"
    SUSTAINED_BIAS = "SustainedBias"
    EXCURSIONS = "Excursions"
    VARIABILITY = "Variability"
    RHYTHMICITY = "Rhythmicity"
    DIRECTIONALITY = "Directionality"
    IRREGULARITY_COMPLEXITY = "IrregularityComplexity"


# Per-landmark descriptor order within the 374-vector.
METRICS = (
    "mean", "std", "var", "median", "min", "max", "range", "iqr", "energy",
    "skew", "kurtosis", "slope", "zero_cross", "mean_abs_accel",
    "fft_peak_freq", "fft_peak_amp", "hist_entropy", "higuchi_fd",
    "perm_entropy", "rollmean_3", "rollmean_5", "rollmean_7",
)

METRIC_FAMILY = {
    "mean": Family.BASELINE_POSTURE,
    "median": Family.BASELINE_POSTURE,
    "rollmean_3": Family.SUSTAINED_BIAS,
    "rollmean_5": Family.SUSTAINED_BIAS,
    "rollmean_7": Family.SUSTAINED_BIAS,
    "min": Family.EXCURSIONS,
    "max": Family.EXCURSIONS,
    "std": Family.VARIABILITY,
    "var": Family.VARIABILITY,
    "range": Family.VARIABILITY,
    "iqr": Family.VARIABILITY,
    "energy": Family.VARIABILITY,
    "fft_peak_freq": Family.RHYTHMICITY,
    "fft_peak_amp": Family.RHYTHMICITY,
    "slope": Family.DIRECTIONALITY,
    "zero_cross": Family.DIRECTIONALITY,
    "skew": Family.IRREGULARITY_COMPLEXITY,
    "kurtosis": Family.IRREGULARITY_COMPLEXITY,
    "mean_abs_accel": Family.IRREGULARITY_COMPLEXITY,
    "hist_entropy": Family.IRREGULARITY_COMPLEXITY,
    "higuchi_fd": Family.IRREGULARITY_COMPLEXITY,
    "perm_entropy": Family.IRREGULARITY_COMPLEXITY,
}


@dataclass(frozen=True)
class FeatureName:
    landmark: Landmark
    metric: str

    def __post_init__(self):
        if self.metric not in METRIC_FAMILY:
            raise ValueError(f"unknown metric {self.metric!r}")

    @property
    def family(self) -> Family:
        return METRIC_FAMILY[self.metric]

    @property
    def region(self) -> Region:
        return self.landmark.region

    def __str__(self) -> str:
        return f"{self.landmark.value}_distance_{self.metric}"

    @classmethod
    def parse(cls, text: str) -> "FeatureName":
        head, sep, metric = text.partition("_distance_")
        if not sep:
            raise ValueError(f"not a feature name: {text!r}")
        return cls(Landmark(head), metric)


FEATURE_NAMES = [FeatureName(lm, m) for lm in LANDMARKS for m in METRICS]
FEATURE_COLUMNS = [str(f) for f in FEATURE_NAMES]
N_FEATURES = len(FEATURE_NAMES)
