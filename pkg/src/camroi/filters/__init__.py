from .config import FilterConfig
from .pipeline import (
    FilterReport,
    apply_regression_filter,
    apply_svm_filter,
    fit_regression_models,
    run_filter_pipeline,
    train_svm_models,
)
from .ransac import InsufficientDataError, RankDeficiencyError, RegressionModel, fit_ransac
from .svm import DegenerateTrainingError, SvmModel, train_svm

__all__ = [
    "FilterConfig", "FilterReport", "RegressionModel", "SvmModel",
    "fit_ransac", "train_svm", "apply_regression_filter", "apply_svm_filter",
    "fit_regression_models", "train_svm_models", "run_filter_pipeline",
    "InsufficientDataError", "RankDeficiencyError", "DegenerateTrainingError",
]
