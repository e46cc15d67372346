"""Accuracy and consensus measures over the node estimates."""

from __future__ import annotations

import numpy as np

from .errors import SizeMismatch


def _estimates(states) -> np.ndarray:
    X = getattr(states, "estimates", states)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise SizeMismatch(f"expected an (L, n) array of estimates, got shape {X.shape}")
    return X


def rmse(states, x_true) -> float:
    """Root-mean-square distance of the node estimates from the true source."""
    X = _estimates(states)
    x = np.asarray(x_true, dtype=float)
    if x.shape != X.shape[1:]:
        raise SizeMismatch(f"x_true has shape {x.shape}, estimates are {X.shape}")
    diff = X - x
    return float(np.sqrt(np.einsum("ij,ij->", diff, diff) / X.shape[0]))


def disagreement(states) -> float:
    """Root-mean-square deviation of the node estimates from their mean."""
    X = _estimates(states)
    diff = X - X.mean(axis=0)
    return float(np.sqrt(np.einsum("ij,ij->", diff, diff) / X.shape[0]))


def mean_bias(states, x_true) -> float:
    """Distance between the average estimate and the true source.

    Together with :func:`disagreement` this splits the error exactly:
    ``rmse**2 == disagreement**2 + mean_bias**2``.
    """
    X = _estimates(states)
    return float(np.linalg.norm(X.mean(axis=0) - np.asarray(x_true, dtype=float)))
