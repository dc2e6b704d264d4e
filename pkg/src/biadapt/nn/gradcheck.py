"""Central-difference verification of hand-written gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import NonFiniteError
from .layers import Module, Param

# Gradients below this magnitude are compared in absolute terms: with eps = 1e-5 the
# central difference of an O(1) loss carries ~1e-10 of rounding noise.
REL_FLOOR = 1e-5


def check_gradients(objective: Callable[[bool], float], params: list[Param] | Module, eps: float = 1e-5,
                    max_entries: int | None = None, seed: int = 0) -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``objective(backward)`` must return the scalar loss and, when ``backward`` is
    true, accumulate analytic gradients into the parameters. All randomness
    inside it has to be frozen. The relative error of one entry is
    ``|a - n| / max(|a|, |n|, REL_FLOOR)``. With ``max_entries`` a seeded
    subset of entries per parameter is checked instead of all of them.
    """
    if isinstance(params, Module):
        params = [p for _, p in params.params()]
    for p in params:
        p.zero_grad()
    base = objective(True)
    if not np.isfinite(base):
        raise NonFiniteError("loss is not finite")
    analytic = [p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.value.reshape(-1)
        n = flat.size
        idx = np.arange(n) if max_entries is None or n <= max_entries else rng.choice(n, max_entries, replace=False)
        for i in idx:
            old = flat[i]
            flat[i] = old + eps
            up = objective(False)
            flat[i] = old - eps
            down = objective(False)
            flat[i] = old
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NonFiniteError(f"loss not finite while perturbing {p.name}")
            num = (up - down) / (2.0 * eps)
            ana = a.reshape(-1)[i]
            err = abs(ana - num) / max(abs(ana), abs(num), REL_FLOOR)
            worst = max(worst, err)
    for p, a in zip(params, analytic):
        p.grad[...] = a
    return worst
