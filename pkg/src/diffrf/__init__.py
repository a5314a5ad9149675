"""Distance and visit-frequency random partitioning forests for anomaly detection."""

from ._backend import BACKEND
from .datagen import LabeledDataset, apply_drift, gen_donut, gen_donut25, load_csv, save_csv
from .exceptions import (ConfigurationError, CorruptModelError, DiffRFError, InputError,
                         ModelFileError, ModelVersionError, UndefinedMetricError)
from .forest import Forest, ForestConfig, build_forest, leaf_population_stats
from .iforest import build_iforest, iforest_score
from .metrics import average_precision, equal_error_rate, ks_two_sample, roc_auc, roc_curve
from .persistence import ModelFile, load_model, save_model
from .scoring import batch_scores, collective_scores, frequency_score, pointwise_score
from .tuning import AlphaReport, distribution_distance, tune_alpha

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "LabeledDataset", "apply_drift", "gen_donut", "gen_donut25", "load_csv",
    "save_csv", "ConfigurationError", "CorruptModelError", "DiffRFError", "InputError",
    "ModelFileError", "ModelVersionError", "UndefinedMetricError", "Forest", "ForestConfig",
    "build_forest", "leaf_population_stats", "build_iforest", "iforest_score",
    "average_precision", "equal_error_rate", "ks_two_sample", "roc_auc", "roc_curve",
    "ModelFile", "load_model", "save_model", "batch_scores", "collective_scores",
    "frequency_score", "pointwise_score", "AlphaReport", "distribution_distance", "tune_alpha",
]
