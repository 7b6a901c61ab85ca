"""Soft-argmax decoding, L1 training losses and a finite-difference checker.

Coordinates are 0-indexed cell centers. A 2D map is an ``(H, W)`` array and
decodes to ``(x, y)``; a 3D volume is ``(D, H, W)`` and decodes to
``(x, y, z)``. One softmax runs over the whole grid.
"""
from __future__ import annotations

import numpy as np

from .errors import JointCountMismatch


def _softmax(h: np.ndarray) -> np.ndarray:
    e = np.exp(h - h.max())
    return e / e.sum()


def _grids(shape):
    # one coordinate grid per output axis, in (x, y[, z]) order
    axes = np.indices(shape, dtype=np.float64)
    return axes[::-1]


def _soft_argmax(h: np.ndarray, ndim: int) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != ndim or min(h.shape) < 1:
        raise ValueError(f"expected a {ndim}D score grid, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("heatmap scores must be finite")
    # normalize after the weighted sum: uniform and one-hot maps decode exactly
    e = np.exp(h - h.max())
    total = e.sum()
    return np.array([np.sum(e * g) / total for g in _grids(h.shape)])


def _soft_argmax_jacobian(h: np.ndarray, ndim: int) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    p = _softmax(h)
    out = []
    for g in _grids(h.shape):
        c = np.sum(p * g)
        out.append(p * (g - c))
    return np.stack(out)


def soft_argmax_2d(h) -> np.ndarray:
    return _soft_argmax(h, 2)


def soft_argmax_3d(h) -> np.ndarray:
    return _soft_argmax(h, 3)


def soft_argmax_2d_jacobian(h) -> np.ndarray:
    """d(x, y)/d(scores), shape ``(2, H, W)``."""
    return _soft_argmax_jacobian(h, 2)


def soft_argmax_3d_jacobian(h) -> np.ndarray:
    """d(x, y, z)/d(scores), shape ``(3, D, H, W)``."""
    return _soft_argmax_jacobian(h, 3)


def l1_root_loss(pred, gt) -> float:
    """Sum of absolute differences over (x, y, Z)."""
    return float(np.sum(np.abs(np.asarray(pred, float) - np.asarray(gt, float))))


def l1_pose_loss(pred, gt) -> float:
    """Per-joint L1 distance averaged over joints."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise JointCountMismatch(f"pose shapes differ: {pred.shape} vs {gt.shape}")
    return float(np.mean(np.sum(np.abs(pred - gt), axis=-1)))


def finite_difference_gradient(f, x, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x`` (any shape)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        g[i] = (fp - fm) / (2 * eps)
    return grad
