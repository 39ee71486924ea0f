"""Smoothed soft Dice loss and its analytic gradient.

The per-sample loss is ``1 - (2*sum(p*y) + eps) / (sum(p) + sum(y) + eps)``
with the sums running over that sample's pixels; a batch scores the SUM of
per-sample losses, so duplicating a sample exactly doubles its gradient
contribution. eps = 1.0 keeps the empty-label case well defined.
"""

from __future__ import annotations

import numpy as np

from ..errors import GeometryError

EPS = 1.0


def _flatten_pair(p: np.ndarray, y: np.ndarray):
    if p.shape != y.shape:
        raise GeometryError(f"prediction shape {p.shape} does not match label shape {y.shape}")
    n = p.shape[0]
    return p.reshape(n, -1), y.reshape(n, -1)


def dice_loss(p: np.ndarray, y: np.ndarray, eps: float = EPS) -> float:
    """Batch Dice loss: sum over samples of the smoothed per-sample loss."""
    pf, yf = _flatten_pair(p, y)
    inter = (pf * yf).sum(axis=1)
    denom = pf.sum(axis=1) + yf.sum(axis=1) + eps
    per_sample = 1.0 - (2.0 * inter + eps) / denom
    return float(per_sample.sum())


def dice_loss_grad(p: np.ndarray, y: np.ndarray, eps: float = EPS) -> np.ndarray:
    """d(dice_loss)/dp, same shape as p."""
    pf, yf = _flatten_pair(p, y)
    inter = (pf * yf).sum(axis=1, keepdims=True)
    denom = pf.sum(axis=1, keepdims=True) + yf.sum(axis=1, keepdims=True) + eps
    num = 2.0 * inter + eps
    g = -(2.0 * yf * denom - num) / (denom * denom)
    return g.reshape(p.shape)
