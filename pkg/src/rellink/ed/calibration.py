"""Platt-style logistic calibration of raw ED scores."""

from typing import Sequence, Tuple

import numpy as np

from ..errors import DegenerateCalibration

_LOGIT_CLIP = 30.0  # keeps sigma strictly inside (0, 1) in float64


def sigmoid(x):
    x = np.clip(np.asarray(x, dtype=np.float64), -_LOGIT_CLIP, _LOGIT_CLIP)
    return 1.0 / (1.0 + np.exp(-x))


def _loglik(a: float, b: float, z: np.ndarray, y: np.ndarray, ridge: float) -> float:
    t = np.clip(a * z + b, -_LOGIT_CLIP, _LOGIT_CLIP)
    return float(np.mean(y * t - np.logaddexp(0.0, t)) - 0.5 * ridge * (a * a + b * b))


def fit_calibration(scores: Sequence[float], labels: Sequence[int], max_iter: int = 100,
                    tol: float = 1e-10, ridge: float = 1e-6) -> Tuple[float, float]:
    """Maximum-likelihood fit of P(correct | s) = sigma(a*s + b).

    Newton's method with step halving on standardized scores; the tiny
    ``ridge`` keeps the fit finite when the classes are separable. The result
    is mapped back to the raw score scale.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    if len(s) < 2 or y.min() == y.max():
        raise DegenerateCalibration("calibration needs both correct and incorrect examples")
    mu, sd = s.mean(), s.std()
    sd = sd if sd > 0 else 1.0
    z = (s - mu) / sd
    w = np.zeros(2)
    current = _loglik(0.0, 0.0, z, y, ridge)
    for _ in range(max_iter):
        p = sigmoid(w[0] * z + w[1])
        r = y - p
        grad = np.array([np.mean(r * z), np.mean(r)]) - ridge * w
        v = p * (1 - p)
        hess = np.array([[np.mean(v * z * z), np.mean(v * z)],
                         [np.mean(v * z), np.mean(v)]]) + ridge * np.eye(2)
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while t > 1e-8:
            cand = w + t * step
            value = _loglik(cand[0], cand[1], z, y, ridge)
            if value >= current:
                break
            t *= 0.5
        else:
            break
        w, current = cand, value
        if np.max(np.abs(t * step)) < tol:
            break
    a, b = float(w[0]), float(w[1])
    return a / sd, b - a * mu / sd


def apply_calibration(score, a: float, b: float):
    """Map raw score(s) to a probability in (0, 1)."""
    return sigmoid(a * np.asarray(score, dtype=np.float64) + b)
