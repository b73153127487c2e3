from .evaluation import (
    AucComparison,
    CvReport,
    ImportanceReport,
    chisquare_auc_compare,
    cross_validate,
    oob_importance,
    roc_auc,
    roc_curve,
    stratified_kfold,
)
from .forest import (
    ForestModel,
    ForestParams,
    Tree,
    load_forest,
    oob_accuracy,
    predict,
    predict_proba,
    save_forest,
    train_forest,
)

__all__ = [
    "AucComparison",
    "CvReport",
    "ImportanceReport",
    "ForestModel",
    "ForestParams",
    "Tree",
    "chisquare_auc_compare",
    "cross_validate",
    "load_forest",
    "oob_accuracy",
    "oob_importance",
    "predict",
    "predict_proba",
    "roc_auc",
    "roc_curve",
    "save_forest",
    "stratified_kfold",
    "train_forest",
]
