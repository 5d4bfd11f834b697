"""Classifiers: the random forest and the logistic-regression baseline."""

from .forest import (ForestModel, ForestParams, feature_importance, load_model,
                     predict, predict_batch, save_model, sensor_importance,
                     train_forest)
from .logistic import LogisticModel, loss_and_gradient, predict_logistic, train_logistic

__all__ = [
    "ForestModel", "ForestParams", "feature_importance", "load_model",
    "predict", "predict_batch", "save_model", "sensor_importance",
    "train_forest",
    "LogisticModel", "loss_and_gradient", "predict_logistic", "train_logistic",
]
