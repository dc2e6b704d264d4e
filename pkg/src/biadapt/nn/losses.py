"""Binary cross-entropy, Gaussian KL and rotation geodesic losses, each with its gradient.

All functions take batches and return ``(mean_loss, grads...)`` so the
training code does not need a separate backward call.
"""

from __future__ import annotations

import numpy as np

from .layers import sigmoid

BCE_EPS = 1e-7


def bce(pred, target) -> np.ndarray:
    """Elementwise ``-[r log p + (1-r) log(1-p)]`` with ``p`` clamped to ``[1e-7, 1-1e-7]``."""
    p = np.clip(np.asarray(pred, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    r = np.asarray(target, dtype=np.float64)
    return -(r * np.log(p) + (1.0 - r) * np.log1p(-p))


def bce_loss(pred, target) -> float:
    return float(np.mean(bce(pred, target)))


def bce_with_logits(logits: np.ndarray, target: np.ndarray, weights: np.ndarray | None = None):
    """Weighted mean BCE of ``sigmoid(logits)`` and its gradient w.r.t. the logits.

    The gradient is ``p - r`` inside the clamp and zero where the probability
    is clamped, matching the loss value exactly.
    """
    p = sigmoid(logits)
    w = np.full(p.shape, 1.0 / p.size) if weights is None else weights / np.sum(weights)
    loss = float(np.sum(w * bce(p, target)))
    inside = (p > BCE_EPS) & (p < 1.0 - BCE_EPS) & (np.abs(logits) < 30.0)
    grad = np.where(inside, w * (p - target), 0.0)
    return loss, grad


def kl_std_normal(mu, logvar) -> float:
    """``0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)`` for one latent vector."""
    mu = np.asarray(mu, dtype=np.float64)
    lv = np.asarray(logvar, dtype=np.float64)
    return float(0.5 * np.sum(np.exp(lv) + mu * mu - 1.0 - lv))


def kl_loss(mu: np.ndarray, logvar: np.ndarray):
    """Batch mean of per-row KL with gradients w.r.t. ``mu`` and ``logvar``."""
    n = mu.shape[0]
    per = 0.5 * np.sum(np.exp(logvar) + mu * mu - 1.0 - logvar, axis=-1)
    return float(np.mean(per)), mu / n, 0.5 * (np.exp(logvar) - 1.0) / n


def geodesic(R_hat: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Per-pair angle ``arccos((tr(R_hat^T R) - 1) / 2)`` with the argument clamped to ``[-1, 1]``."""
    c = (np.einsum("...ij,...ij->...", R_hat, R) - 1.0) / 2.0
    return np.arccos(np.clip(c, -1.0, 1.0))


def geodesic_loss(R_hat: np.ndarray, R: np.ndarray):
    """Batch mean geodesic distance and its gradient w.r.t. ``R_hat``.

    Where the arccos argument sits on or beyond the clamp the gradient is zero.
    """
    R_hat = np.asarray(R_hat, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    single = R_hat.ndim == 2
    if single:
        R_hat, R = R_hat[None], R[None]
    n = R_hat.shape[0]
    c = (np.einsum("nij,nij->n", R_hat, R) - 1.0) / 2.0
    inside = np.abs(c) < 1.0
    loss = float(np.mean(np.arccos(np.clip(c, -1.0, 1.0))))
    s = np.sqrt(np.where(inside, 1.0 - c * c, 1.0))
    coef = np.where(inside, -0.5 / s, 0.0) / n
    grad = coef[:, None, None] * R
    return loss, (grad[0] if single else grad)
