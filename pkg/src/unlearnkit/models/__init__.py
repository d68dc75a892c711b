from .base import DENSE_HESSIAN_CAP, GradientCounter, LossConfig, Model, ModelParams
from .charlm import CharContextModel, normalize_text
from .linear import LogisticModel, RidgeModel, SoftmaxModel
from .mlp import MlpModel

__all__ = [
    "DENSE_HESSIAN_CAP",
    "GradientCounter",
    "LossConfig",
    "Model",
    "ModelParams",
    "CharContextModel",
    "normalize_text",
    "LogisticModel",
    "RidgeModel",
    "SoftmaxModel",
    "MlpModel",
]
