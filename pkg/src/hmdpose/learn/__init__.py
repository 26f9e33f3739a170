"""Scalers, feature selection, classifiers, calibration and pipelines."""
from .calibration import CalibratedModel, fit_sigmoid, platt_calibrate
from .models import KNN, BaggedTrees, ConvergenceWarning, DecisionTree, LogisticRegression, make_model, \
    fit_bagged_trees, fit_knn, fit_logreg
from .pipeline import DEFAULT_GRIDS, Pipeline, PipelineSpec, expand_grid, fit_pipeline, grid_search, \
    load_bundle, save_bundle
from .scalers import Scaler, ScalerKind, apply_scaler, fit_scaler
from .selection import mutual_information, select_k_best_mi
