from .adjust import (
    AdjustmentParams,
    OcrLabel,
    TrainingLabel,
    adjust_distribution,
    augment_training,
    estimate_moments,
    ocr_labels_from_predictions,
    sample_target_moments,
)
from .forest import (
    PRESETS,
    ForestRegressor,
    HyperParams,
    LinearBaseline,
    RandomForest,
    TreeRegressor,
    feature_importances,
    fit_forest,
    fit_tree,
    make_regressor,
    predict,
    preset,
    tree_stream,
)
from .selection import CvResult, cross_validate, expand_grid, grid_search, kfold_indices, write_grid_csv
from .tree import Tree, build_tree

__all__ = [
    "AdjustmentParams", "OcrLabel", "TrainingLabel", "adjust_distribution", "augment_training",
    "estimate_moments", "ocr_labels_from_predictions", "sample_target_moments", "PRESETS",
    "ForestRegressor", "HyperParams", "LinearBaseline", "RandomForest", "TreeRegressor",
    "feature_importances", "fit_forest", "fit_tree", "make_regressor", "predict", "preset", "tree_stream",
    "CvResult", "cross_validate", "expand_grid", "grid_search", "kfold_indices", "write_grid_csv",
    "Tree", "build_tree",
]
