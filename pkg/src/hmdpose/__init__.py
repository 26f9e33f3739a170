"""Kinematic phenotyping of hyperkinetic movement disorders from 2D pose keypoints.

Keypoint CSVs are cut into annotation windows, each window becomes a 374-value
descriptor vector, and per-label classifiers plus control-aware thresholds
turn window probabilities into subject-level phenotype calls.
"""
from .config import RunConfig
from .dataset import WindowRecord, build_multilabel, build_screening, extract_cohort
from .decide import Pooling, ThresholdPolicy, pool, tune_threshold
from .errors import DegenerateData, HMDError, InputError
from .features import FeatureConfig, channel_features, feature_vector
from .ingest import PoseSeries, load_pose_csv, load_pose_dir
from .synth import CohortConfig, generate_cohort
from .taxonomy import FEATURE_COLUMNS, FEATURE_NAMES, LANDMARKS, PHENOTYPES, Family, Landmark, Phenotype

__version__ = "0.1.0"
