"""Continuous 6D rotation representation: the first two columns, Gram-Schmidt on decode."""

from __future__ import annotations

import numpy as np


def encode(R: np.ndarray) -> np.ndarray:
    """``(..., 3, 3)`` rotations to ``(..., 6)`` as ``[col0, col1]``."""
    R = np.asarray(R, dtype=np.float64)
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def decode(x: np.ndarray):
    """``(..., 6)`` to rotations ``(..., 3, 3)``; also returns the cache for :func:`decode_backward`."""
    a1, a2 = x[..., :3], x[..., 3:]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    b1 = a1 / n1
    d = np.sum(b1 * a2, axis=-1, keepdims=True)
    u2 = a2 - d * b1
    n2 = np.linalg.norm(u2, axis=-1, keepdims=True)
    b2 = u2 / n2
    b3 = np.cross(b1, b2)
    R = np.stack([b1, b2, b3], axis=-1)
    return R, (a2, n1, b1, d, n2, b2)


def decode_backward(cache, gR: np.ndarray) -> np.ndarray:
    a2, n1, b1, d, n2, b2 = cache
    g1, g2, g3 = gR[..., :, 0], gR[..., :, 1], gR[..., :, 2]
    # b3 = b1 x b2
    g1 = g1 + np.cross(b2, g3)
    g2 = g2 + np.cross(g3, b1)
    # b2 = u2 / |u2|
    gu2 = (g2 - np.sum(g2 * b2, axis=-1, keepdims=True) * b2) / n2
    # u2 = a2 - (b1 . a2) b1
    ga2 = gu2 - np.sum(gu2 * b1, axis=-1, keepdims=True) * b1
    g1 = g1 - d * gu2 - np.sum(gu2 * b1, axis=-1, keepdims=True) * a2
    # b1 = a1 / |a1|
    ga1 = (g1 - np.sum(g1 * b1, axis=-1, keepdims=True) * b1) / n1
    return np.concatenate([ga1, ga2], axis=-1)
