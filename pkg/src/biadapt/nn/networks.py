"""Gripper networks: a conditional VAE over orientations (proposal) and a success scorer.

Both are built on a :class:`ConditionEncoder` that turns a batch of
(cloud, contacts, orientations) into one feature row per sample. The
concatenation order is fixed: for gripper 1 then gripper 2, the per-point
feature at the contact (128), the contact code (32) and, when the gripper's
orientation is an input, the orientation code (32).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BiAdaptError
from . import rotation6d
from .encoders import PointEncoder, VectorEncoder
from .layers import MLP, Module, check_finite, sigmoid
from .losses import bce_with_logits, geodesic_loss, kl_loss


@dataclass(frozen=True)
class CondBatch:
    """Network inputs for ``B`` samples drawn from ``S`` clouds.

    clouds: (S, k, 6) centred points and normals; centroids: (S, 3);
    scene_index: (B,) cloud of each sample; contacts / normals: (B, G, 3);
    rotations: (B, G', 3, 3) for the first ``G'`` grippers.
    """

    clouds: np.ndarray
    centroids: np.ndarray
    scene_index: np.ndarray
    contacts: np.ndarray
    normals: np.ndarray
    rotations: np.ndarray

    def __len__(self):
        return self.scene_index.shape[0]

    def take(self, idx) -> "CondBatch":
        idx = np.asarray(idx)
        return CondBatch(self.clouds, self.centroids, self.scene_index[idx], self.contacts[idx],
                         self.normals[idx], self.rotations[idx])

    def with_rotations(self, rotations: np.ndarray) -> "CondBatch":
        return CondBatch(self.clouds, self.centroids, self.scene_index, self.contacts, self.normals, rotations)

    def repeat(self, n: int) -> "CondBatch":
        """Each sample repeated ``n`` times in a row (sample-major)."""
        return self.take(np.repeat(np.arange(len(self)), n))


class ConditionEncoder(Module):
    def __init__(self, n_grippers: int, n_rotations: int, rng: np.random.Generator, point_dim: int = 128,
                 code_dim: int = 32):
        if not (1 <= n_grippers <= 2 and 0 <= n_rotations <= n_grippers):
            raise BiAdaptError("invalid-network", "need 1-2 grippers and at most one rotation per gripper")
        self.point = PointEncoder(rng, out_dim=point_dim)
        self.contact = VectorEncoder(3, rng, out_dim=code_dim)
        self.orient = VectorEncoder(9, rng, out_dim=code_dim)
        self.n_grippers, self.n_rotations = n_grippers, n_rotations
        self.point_dim, self.code_dim = point_dim, code_dim

    def children(self):
        return [("point", self.point), ("contact", self.contact), ("orient", self.orient)]

    @property
    def dim(self) -> int:
        return self.n_grippers * (self.point_dim + self.code_dim) + self.n_rotations * self.code_dim

    def forward(self, b: CondBatch):
        B, G = len(b), self.n_grippers
        if b.contacts.shape[1] < G or b.rotations.shape[1] < self.n_rotations:
            raise BiAdaptError("shape-mismatch", "batch lacks contacts or rotations for this network")
        rel = b.contacts[:, :G] - b.centroids[b.scene_index][:, None, :]
        queries = np.concatenate([rel, b.normals[:, :G]], axis=-1).reshape(B * G, 6)
        fs, cs = self.point.forward_queries(b.clouds, queries, np.repeat(b.scene_index, G))
        fp, cp = self.contact.forward(rel.reshape(B * G, 3))
        fs = fs.reshape(B, G, -1)
        fp = fp.reshape(B, G, -1)
        cr = None
        if self.n_rotations:
            fr, cr = self.orient.forward(b.rotations[:, :self.n_rotations].reshape(B * self.n_rotations, 9))
            fr = fr.reshape(B, self.n_rotations, -1)
        parts = []
        for g in range(G):
            parts += [fs[:, g], fp[:, g]]
            if g < self.n_rotations:
                parts.append(fr[:, g])
        return np.concatenate(parts, axis=1), (cs, cp, cr, B)

    def backward(self, cache, gy: np.ndarray) -> None:
        cs, cp, cr, B = cache
        G, P, C = self.n_grippers, self.point_dim, self.code_dim
        gs = np.zeros((B, G, P))
        gp = np.zeros((B, G, C))
        gr = np.zeros((B, self.n_rotations, C))
        off = 0
        for g in range(G):
            gs[:, g] = gy[:, off:off + P]
            off += P
            gp[:, g] = gy[:, off:off + C]
            off += C
            if g < self.n_rotations:
                gr[:, g] = gy[:, off:off + C]
                off += C
        self.point.backward_queries(cs, gs.reshape(B * G, P))
        self.contact.backward(cp, gp.reshape(B * G, C))
        if self.n_rotations:
            self.orient.backward(cr, gr.reshape(B * self.n_rotations, C))


class Scorer(Module):
    """Action scoring network: condition features to a success probability."""

    def __init__(self, n_grippers: int, rng: np.random.Generator, hidden: int = 64):
        self.cond = ConditionEncoder(n_grippers, n_grippers, rng)
        self.mlp = MLP([self.cond.dim, hidden, 1], rng)

    def children(self):
        return [("cond", self.cond), ("mlp", self.mlp)]

    def logits(self, b: CondBatch):
        c, cc = self.cond.forward(b)
        z, cm = self.mlp.forward(c)
        return check_finite(z[:, 0], "scorer"), (cc, cm)

    def predict(self, b: CondBatch) -> np.ndarray:
        return sigmoid(self.logits(b)[0])

    def loss(self, b: CondBatch, targets: np.ndarray, weights: np.ndarray | None = None,
             backward: bool = True) -> float:
        z, (cc, cm) = self.logits(b)
        loss, gz = bce_with_logits(z, np.asarray(targets, dtype=np.float64), weights)
        if backward:
            gc = self.mlp.backward(cm, gz[:, None])
            self.cond.backward(cc, gc)
        return loss


class Proposal(Module):
    """Conditional VAE over gripper orientations with a 6D output head.

    Training reconstructs the given orientation of the last gripper from the
    recognition posterior; sampling decodes prior draws ``z = eta``.
    """

    def __init__(self, n_grippers: int, rng: np.random.Generator, latent: int = 16, hidden: int = 64,
                 kl_weight: float = 0.1):
        self.cond = ConditionEncoder(n_grippers, n_grippers - 1, rng)
        self.recog = MLP([self.cond.code_dim + self.cond.dim, hidden, 2 * latent], rng)
        self.decoder = MLP([latent + self.cond.dim, hidden, hidden, 6], rng)
        self.latent = latent
        self.kl_weight = kl_weight
        self.n_grippers = n_grippers

    def children(self):
        return [("cond", self.cond), ("recog", self.recog), ("decoder", self.decoder)]

    def _decode(self, z: np.ndarray, c: np.ndarray):
        x, cd = self.decoder.forward(np.concatenate([z, c], axis=1))
        R, cr = rotation6d.decode(check_finite(x, "proposal decoder"))
        return R, (cd, cr)

    def sample(self, b: CondBatch, eta: np.ndarray) -> np.ndarray:
        """Orientations decoded from latent draws ``eta`` ``(B, latent)``."""
        c, _ = self.cond.forward(b)
        return self._decode(eta, c)[0]

    def loss(self, b: CondBatch, eta: np.ndarray, backward: bool = True) -> tuple[float, float, float]:
        """``geodesic + kl_weight * KL`` reconstructing the last gripper's orientation; returns all three."""
        target = b.rotations[:, self.n_grippers - 1]
        c, cc = self.cond.forward(b)
        t, ct = self.cond.orient.forward(target.reshape(-1, 9))
        h, ch = self.recog.forward(np.concatenate([t, c], axis=1))
        mu, lv = h[:, :self.latent], h[:, self.latent:]
        std = np.exp(0.5 * lv)
        z = mu + std * eta
        R, cd = self._decode(z, c)
        geo, gR = geodesic_loss(R, target)
        kl, gmu, glv = kl_loss(mu, lv)
        total = geo + self.kl_weight * kl
        if not np.isfinite(total):
            check_finite(np.array([total]), "proposal loss")
        if backward:
            cdec, crot = cd
            gx = self.decoder.backward(cdec, rotation6d.decode_backward(crot, gR))
            gz, gc = gx[:, :self.latent], gx[:, self.latent:]
            gmu = gmu * self.kl_weight + gz
            glv = glv * self.kl_weight + gz * eta * 0.5 * std
            gh = self.recog.backward(ch, np.concatenate([gmu, glv], axis=1))
            gt, gc2 = gh[:, :self.cond.code_dim], gh[:, self.cond.code_dim:]
            self.cond.orient.backward(ct, gt)
            self.cond.backward(cc, gc + gc2)
        return total, geo, kl
