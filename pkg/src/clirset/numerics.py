"""Small numerically careful primitives used by the probabilistic modules."""

from __future__ import annotations

import numpy as np

# Global probability floor: evidence never reaches exactly 0 or 1, so every
# downstream log and ratio stays finite.
DEFAULT_EPSILON = 1e-6


def sigmoid(z):
    """Logistic function, overflow-safe for large |z|, scalar or ndarray."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def softplus(z):
    """log(1 + exp(z)) without overflow; equals -log sigmoid(-z)."""
    return np.logaddexp(0.0, z)


def clamp_prob(p: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """Clamp a probability into [epsilon, 1 - epsilon]."""
    if p < epsilon:
        return epsilon
    ceiling = 1.0 - epsilon
    if p > ceiling:
        return ceiling
    return p
