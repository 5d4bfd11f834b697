"""Multinomial logistic regression baseline, fit by gradient descent.

Features are standardized on the training data (zero-variance columns pass
through as zero). The loss is the mean cross-entropy plus an L2 penalty on
the full weight matrix including the bias column, which makes the large-
lambda limit collapse to exactly uniform predictions. Optimization is plain
gradient descent with Armijo backtracking, so the recorded loss sequence is
strictly non-increasing across accepted steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LogisticModel", "train_logistic", "predict_logistic",
           "predict_proba", "loss_and_gradient"]


@dataclass
class LogisticModel:
    labels: list[str]
    weights: np.ndarray  # (C, F + 1), bias last
    mean: np.ndarray     # (F,)
    scale: np.ndarray    # (F,), 0 where the training column was constant
    lam: float
    tol: float
    n_iter: int
    grad_norm: float
    losses: list[float]


def _standardize(x: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    z = np.zeros_like(x)
    ok = scale > 0
    z[:, ok] = (x[:, ok] - mean[ok]) / scale[ok]
    return z


def _with_bias(z: np.ndarray) -> np.ndarray:
    return np.hstack([z, np.ones((len(z), 1))])


def loss_and_gradient(weights: np.ndarray, xb: np.ndarray, y_codes: np.ndarray,
                      lam: float) -> tuple[float, np.ndarray]:
    """L2-regularized mean cross-entropy and its analytic gradient."""
    n = len(xb)
    scores = xb @ weights.T
    scores -= scores.max(axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(scores), axis=1))
    log_p = scores - log_z[:, None]
    nll = -float(np.mean(log_p[np.arange(n), y_codes]))
    loss = nll + 0.5 * lam * float(np.sum(weights ** 2))

    p = np.exp(log_p)
    p[np.arange(n), y_codes] -= 1.0
    grad = p.T @ xb / n + lam * weights
    return loss, grad


def train_logistic(x, y, lam: float = 1e-3, tol: float = 1e-6,
                   max_iter: int = 2000) -> LogisticModel:
    """Fit until the gradient Frobenius norm drops to ``tol``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite training data")
    labels = sorted(set(y))
    if len(labels) < 2:
        raise ValueError("training data contains a single class")
    code = {label: i for i, label in enumerate(labels)}
    y_codes = np.array([code[v] for v in y], dtype=np.intp)

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    # float accumulation can leave a ~1e-16 std on a constant column
    scale[scale <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 0.0
    xb = _with_bias(_standardize(x, mean, scale))

    weights = np.zeros((len(labels), xb.shape[1]))
    loss, grad = loss_and_gradient(weights, xb, y_codes, lam)
    if not np.isfinite(loss):
        raise ValueError("non-finite loss; check lambda and the data")
    losses = [loss]
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        gnorm2 = float(np.sum(grad ** 2))
        if np.sqrt(gnorm2) <= tol:
            it -= 1
            break
        step = min(step * 2.0, 1e4)
        while True:
            trial = weights - step * grad
            trial_loss, trial_grad = loss_and_gradient(trial, xb, y_codes, lam)
            if np.isfinite(trial_loss) and trial_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-18:
                raise ValueError("line search stalled; non-finite or flat loss")
        weights, loss, grad = trial, trial_loss, trial_grad
        losses.append(loss)

    if not np.all(np.isfinite(weights)):
        raise ValueError("optimizer produced non-finite weights")
    return LogisticModel(labels=labels, weights=weights, mean=mean, scale=scale,
                         lam=lam, tol=tol, n_iter=it,
                         grad_norm=float(np.linalg.norm(grad)), losses=losses)


def predict_proba(model: LogisticModel, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xb = _with_bias(_standardize(x, model.mean, model.scale))
    scores = xb @ model.weights.T
    scores -= scores.max(axis=1, keepdims=True)
    p = np.exp(scores)
    return p / p.sum(axis=1, keepdims=True)


def predict_logistic(model: LogisticModel, x) -> list[str]:
    proba = predict_proba(model, x)
    return [model.labels[i] for i in np.argmax(proba, axis=1)]
