"""Trajectory-feature extraction and the detectors trained on it."""

from .ensemble import EnsembleDetector, fit_ensemble, predict_ensemble, predict_ensemble_batch
from .features import (
    DetectionSample,
    extract_features,
    features_batch,
    read_feature_csv,
    write_feature_csv,
)
from .forest import ForestConfig, RandomForest, fit_forest
from .metrics import auroc
from .quantile import QuantileCostDetector, fit_quantile_detector, predict_quantile

__all__ = [
    "DetectionSample",
    "EnsembleDetector",
    "ForestConfig",
    "QuantileCostDetector",
    "RandomForest",
    "auroc",
    "extract_features",
    "features_batch",
    "fit_ensemble",
    "fit_forest",
    "fit_quantile_detector",
    "predict_ensemble",
    "predict_ensemble_batch",
    "predict_quantile",
    "read_feature_csv",
    "write_feature_csv",
]
