from .base import THRESHOLD, NotDifferentiableError, Scorer
from .evaluation import EvalMetrics, evaluate
from .forest import ForestHyper, ForestModel, train_forest
from .io import load_model, save_model
from .logistic import LogisticHyper, LogisticModel, TrainingDivergedError, train_logistic
from .synthetic import SyntheticModel, UnknownFamilyError, make_synthetic, polygon_vertices

__all__ = [
    "THRESHOLD", "NotDifferentiableError", "Scorer", "EvalMetrics", "evaluate", "ForestHyper",
    "ForestModel", "train_forest", "load_model", "save_model", "LogisticHyper", "LogisticModel",
    "TrainingDivergedError", "train_logistic", "SyntheticModel", "UnknownFamilyError",
    "make_synthetic", "polygon_vertices",
]
