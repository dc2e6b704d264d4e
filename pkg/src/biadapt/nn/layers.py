"""Dense layers with explicit forward caches and hand-written backward rules.

``forward`` returns ``(output, cache)`` and ``backward(cache, grad_out)``
accumulates parameter gradients and returns the input gradient. Passing the
cache around (instead of storing it on the layer) lets one layer be applied
several times in a single graph, as the shared encoders are.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import NonFiniteError


class Param:
    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


def check_finite(x: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values in {where}")
    return x


class Module:
    """Anything owning :class:`Param` objects, possibly through child modules."""

    def children(self) -> list[tuple[str, "Module"]]:
        return []

    def own_params(self) -> list[Param]:
        return []

    def params(self, prefix: str = "") -> list[tuple[str, Param]]:
        out = [(prefix + p.name, p) for p in self.own_params()]
        for name, child in self.children():
            out.extend(child.params(f"{prefix}{name}."))
        return out

    def zero_grad(self) -> None:
        for _, p in self.params():
            p.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.value for name, p in self.params()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.params():
            if name not in state:
                raise KeyError(name)
            v = np.asarray(state[name], dtype=np.float64)
            if v.shape != p.value.shape:
                raise ValueError(f"{name}: shape {v.shape} != {p.value.shape}")
            p.value[...] = v


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        bound = math.sqrt(6.0 / (n_in + n_out))
        self.W = Param("W", rng.uniform(-bound, bound, size=(n_in, n_out)))
        self.b = Param("b", np.zeros(n_out))
        self.n_in, self.n_out = n_in, n_out

    def own_params(self):
        return [self.W, self.b]

    def forward(self, x: np.ndarray):
        return x @ self.W.value + self.b.value, x

    def backward(self, cache, gy: np.ndarray, need_input: bool = True) -> np.ndarray | None:
        x = cache
        self.W.grad += x.reshape(-1, self.n_in).T @ gy.reshape(-1, self.n_out)
        self.b.grad += gy.reshape(-1, self.n_out).sum(axis=0)
        return gy @ self.W.value.T if need_input else None


class ELU:
    """``x`` for ``x > 0``, ``exp(x) - 1`` otherwise (smooth enough for finite-difference checks)."""

    @staticmethod
    def forward(x: np.ndarray):
        # expm1(x) >= x for x <= 0, so the max picks the right branch everywhere
        y = np.expm1(np.minimum(x, 0.0))
        np.maximum(x, y, out=y)
        return y, y

    @staticmethod
    def backward(cache, gy: np.ndarray) -> np.ndarray:
        y = cache
        d = np.minimum(y, 0.0)
        d += 1.0
        return gy * d


class MLP(Module):
    """Stack of :class:`Linear` layers with ELU between them (and after the last if ``act_last``)."""

    def __init__(self, sizes: list[int], rng: np.random.Generator, act_last: bool = False):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.act_last = act_last
        self.sizes = list(sizes)

    def children(self):
        return [(f"l{i}", layer) for i, layer in enumerate(self.layers)]

    def forward(self, x: np.ndarray):
        caches = []
        n = len(self.layers)
        for i, layer in enumerate(self.layers):
            x, c = layer.forward(x)
            a = None
            if i < n - 1 or self.act_last:
                x, a = ELU.forward(x)
            caches.append((c, a))
        return x, caches

    def backward(self, caches, gy: np.ndarray, need_input: bool = True) -> np.ndarray | None:
        n = len(self.layers)
        for i in range(n - 1, -1, -1):
            c, a = caches[i]
            if a is not None:
                gy = ELU.backward(a, gy)
            gy = self.layers[i].backward(c, gy, need_input=need_input or i > 0)
        return gy


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.clip(z, -30.0, 30.0)
    return 1.0 / (1.0 + np.exp(-z))
