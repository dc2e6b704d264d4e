"""Per-point cloud encoder and the small contact / orientation encoders."""

from __future__ import annotations

import numpy as np

from ..errors import BiAdaptError
from .layers import ELU, MLP, Linear, Module, check_finite

POINT_IN = 6  # centred xyz + unit normal


class PointEncoder(Module):
    """Shared per-point MLP, max-pooled global vector, global concat, shared head to ``out_dim``.

    ``forward_points`` returns the feature of every input point (the classic
    segmentation-style output). ``forward_queries`` evaluates the same map for
    arbitrary query rows against the pooled vectors of a batch of clouds, which
    is all the gripper networks need: the feature at each contact point.
    """

    def __init__(self, rng: np.random.Generator, local: tuple[int, ...] = (32, 32), out_dim: int = 128):
        self.local = MLP([POINT_IN, *local], rng, act_last=True)
        self.head = Linear(2 * local[-1], out_dim, rng)
        self.width = local[-1]
        self.out_dim = out_dim

    def children(self):
        return [("local", self.local), ("head", self.head)]

    def _pool(self, clouds: np.ndarray):
        if clouds.ndim != 3 or clouds.shape[2] != POINT_IN:
            raise BiAdaptError("shape-mismatch", f"expected (S, k, {POINT_IN}) clouds, got {clouds.shape}")
        S, k, _ = clouds.shape
        h, lc = self.local.forward(clouds.reshape(S * k, POINT_IN))
        h = h.reshape(S, k, self.width)
        arg = np.argmax(h, axis=1)
        g = np.take_along_axis(h, arg[:, None, :], axis=1)[:, 0, :]
        return g, (lc, arg, S, k)

    def _pool_backward(self, cache, gg: np.ndarray) -> None:
        lc, arg, S, k = cache
        gh = np.zeros((S, k, self.width))
        np.put_along_axis(gh, arg[:, None, :], gg[:, None, :], axis=1)
        self.local.backward(lc, gh.reshape(S * k, self.width), need_input=False)

    def _head(self, h: np.ndarray, g: np.ndarray):
        x = np.concatenate([h, g], axis=-1)
        y, c1 = self.head.forward(x)
        y, c2 = ELU.forward(y)
        return check_finite(y, "point encoder"), (c1, c2)

    def _head_backward(self, cache, gy: np.ndarray):
        c1, c2 = cache
        gx = self.head.backward(c1, ELU.backward(c2, gy))
        return gx[..., :self.width], gx[..., self.width:]

    def forward_points(self, cloud: np.ndarray):
        """``(k, 6)`` cloud to ``(k, out_dim)`` per-point features."""
        cloud = np.asarray(cloud, dtype=np.float64)
        if cloud.ndim != 2:
            raise BiAdaptError("shape-mismatch", f"expected (k, {POINT_IN}) cloud, got {cloud.shape}")
        g, pc = self._pool(cloud[None])
        h, lc = self.local.forward(cloud)
        y, hc = self._head(h, np.broadcast_to(g, h.shape))
        return y, (pc, lc, hc)

    def backward_points(self, cache, gy: np.ndarray) -> None:
        pc, lc, hc = cache
        gh, gg = self._head_backward(hc, gy)
        self.local.backward(lc, gh, need_input=False)
        self._pool_backward(pc, gg.sum(axis=0, keepdims=True))

    def forward_queries(self, clouds: np.ndarray, queries: np.ndarray, scene_index: np.ndarray):
        """Features of ``queries`` ``(Q, 6)``, query ``i`` pooled against ``clouds[scene_index[i]]``."""
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim != 2 or queries.shape[1] != POINT_IN:
            raise BiAdaptError("shape-mismatch", f"expected (Q, {POINT_IN}) queries, got {queries.shape}")
        g, pc = self._pool(np.asarray(clouds, dtype=np.float64))
        h, lc = self.local.forward(queries)
        y, hc = self._head(h, g[scene_index])
        return y, (pc, lc, hc, scene_index, g.shape[0])

    def backward_queries(self, cache, gy: np.ndarray) -> None:
        pc, lc, hc, idx, S = cache
        gh, gq = self._head_backward(hc, gy)
        self.local.backward(lc, gh, need_input=False)
        gg = np.zeros((S, self.width))
        np.add.at(gg, idx, gq)
        self._pool_backward(pc, gg)


class VectorEncoder(Module):
    """Small MLP for a contact position (3) or a flattened rotation (9); output width 32."""

    def __init__(self, n_in: int, rng: np.random.Generator, hidden: int = 32, out_dim: int = 32):
        self.mlp = MLP([n_in, hidden, out_dim], rng, act_last=True)
        self.n_in = n_in
        self.out_dim = out_dim

    def children(self):
        return [("mlp", self.mlp)]

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise BiAdaptError("shape-mismatch", f"expected last dim {self.n_in}, got {x.shape}")
        y, c = self.mlp.forward(x)
        return check_finite(y, "vector encoder"), c

    def backward(self, cache, gy: np.ndarray) -> None:
        self.mlp.backward(cache, gy)
