"""Closed-form proximal maps and Yosida (Moreau) smoothing of the l1 norm."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SmoothingParams:
    """Prox scale ``alpha`` and Yosida parameter ``epsilon``."""

    alpha: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")


def _check_positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def soft_threshold(x, alpha):
    """prox of ``alpha * ||.||_1``, applied coordinate-wise.

    Points with ``|x_i| <= alpha`` map to exactly ``+0.0``.
    """
    _check_positive("alpha", alpha)
    x = np.asarray(x, dtype=float)
    return np.where(x > alpha, x - alpha, np.where(x < -alpha, x + alpha, 0.0))


def yosida_value(x, epsilon):
    """Moreau envelope of the l1 norm (a sum of Huber functions)."""
    _check_positive("epsilon", epsilon)
    a = np.abs(np.asarray(x, dtype=float))
    return float(np.sum(np.where(a >= epsilon, a - 0.5 * epsilon, a * a / (2.0 * epsilon))))


def yosida_grad(x, epsilon):
    """Gradient of :func:`yosida_value`; equals ``(x - soft_threshold(x, eps)) / eps``."""
    _check_positive("epsilon", epsilon)
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) >= epsilon, np.sign(x), x / epsilon)


def prox_smoothed(x, alpha, epsilon):
    """prox of ``alpha * yosida_value(., epsilon)``."""
    _check_positive("alpha", alpha)
    _check_positive("epsilon", epsilon)
    x = np.asarray(x, dtype=float)
    knee = alpha + epsilon
    return np.where(
        x >= knee, x - alpha, np.where(x <= -knee, x + alpha, epsilon * x / knee)
    )
