"""Central finite-difference gradient verification.

``grad_check`` perturbs parameters elementwise (or on a seeded coordinate
sample for big tensors), compares (f(p+h) - f(p-h)) / 2h against the analytic
gradient, and returns the worst relative error with the denominator guarded
by max(|analytic|, |numeric|, 1e-8).
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..errors import NumericError

DENOM_GUARD = 1e-8


def grad_check(loss_fn: Callable[[], tuple[float, Sequence[np.ndarray]]],
               params: Sequence[np.ndarray],
               step: float = 1e-5,
               sample_per_param: int | None = None,
               seed: int = 0) -> float:
    """Return the max relative error between analytic and central-difference grads.

    ``loss_fn`` evaluates the objective at the *current* contents of ``params``
    and returns (loss, grads) with one gradient array per parameter. ``params``
    entries are perturbed in place and always restored. When
    ``sample_per_param`` is given, only that many seeded coordinates per
    tensor are checked instead of every element.
    """
    loss0, grads = loss_fn()
    if not math.isfinite(loss0):
        raise NumericError(f"loss is not finite: {loss0}")
    if len(grads) != len(params):
        raise ValueError(f"loss_fn returned {len(grads)} gradients for {len(params)} params")
    grads = [np.array(g, dtype=np.float64, copy=True) for g in grads]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        if sample_per_param is None or sample_per_param >= flat_p.size:
            idx = np.arange(flat_p.size)
        else:
            idx = rng.choice(flat_p.size, size=sample_per_param, replace=False)
        for i in idx:
            orig = flat_p[i]
            flat_p[i] = orig + step
            hi, _ = loss_fn()
            flat_p[i] = orig - step
            lo, _ = loss_fn()
            flat_p[i] = orig
            if not (math.isfinite(hi) and math.isfinite(lo)):
                raise NumericError(f"non-finite loss during perturbation at index {i}")
            numeric = (hi - lo) / (2.0 * step)
            analytic = flat_g[i]
            denom = max(abs(analytic), abs(numeric), DENOM_GUARD)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
