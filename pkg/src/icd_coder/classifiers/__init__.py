"""Multi-label classifier families: multi-output random forest, one-vs-rest
gradient boosting, and a fully connected network. All consume any feature
matrix (sparse or dense) and score every vocabulary label in [0, 1]."""

from .boosting import BoostingModel, BoostParams, fit_gradient_boosting
from .common import DimensionError, threshold_scores
from .forest import ForestModel, ForestParams, fit_random_forest
from .mlp import DivergenceError, MlpModel, MlpParams, fit_mlp, init_mlp


def predict_scores(model, X):
    """Scores in [0, 1], one column per label."""
    return model.predict_scores(X)


def predict(model, X, threshold: float = 0.5):
    """Binary label matrix: scores >= threshold."""
    return threshold_scores(model.predict_scores(X), threshold)


def load_model(path):
    """Load any family's artifact by its self-describing header."""
    from .common import load_model_artifact

    header, _ = load_model_artifact(path)
    family = header["family"]
    if family == ForestModel.family:
        return ForestModel.load(path)
    if family == BoostingModel.family:
        return BoostingModel.load(path)
    if family == MlpModel.family:
        return MlpModel.load(path)
    raise ValueError(f"unknown model family {family!r}")


__all__ = [
    "BoostingModel",
    "BoostParams",
    "DimensionError",
    "DivergenceError",
    "ForestModel",
    "ForestParams",
    "MlpModel",
    "MlpParams",
    "fit_gradient_boosting",
    "fit_mlp",
    "fit_random_forest",
    "init_mlp",
    "load_model",
    "predict",
    "predict_scores",
    "threshold_scores",
]
