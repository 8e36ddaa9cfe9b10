"""From-scratch multiclass learners over sparse feature rows."""
from .base import (
    DEFAULT_PARAMS,
    FORMAT_VERSION,
    ClassDistribution,
    HyperParams,
    ModelKind,
    TrainedModel,
    load_model,
    predict,
    predict_matrix,
    predict_proba,
    save_model,
    train,
)

__all__ = [
    "DEFAULT_PARAMS",
    "FORMAT_VERSION",
    "ClassDistribution",
    "HyperParams",
    "ModelKind",
    "TrainedModel",
    "load_model",
    "predict",
    "predict_matrix",
    "predict_proba",
    "save_model",
    "train",
]
