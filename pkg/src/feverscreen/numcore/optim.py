"""Adam with bias correction.

update: m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
        m_hat = m / (1 - b1^t)        v_hat = v / (1 - b2^t)
        theta <- theta - alpha * m_hat / (sqrt(v_hat) + eps)

Pure-functional: ``adam_step`` returns fresh parameter arrays and a fresh
state, leaving its inputs untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError


@dataclass
class AdamState:
    alpha: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def init_like(cls, params: list[np.ndarray], alpha: float = 2e-4,
                  beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        return cls(alpha=alpha, beta1=beta1, beta2=beta2, eps=eps, t=0,
                   m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, lr: float | None = None) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update over a parameter list; ``lr`` overrides state.alpha."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError(f"parameter/gradient/state length mismatch: "
                         f"{len(params)}/{len(grads)}/{len(state.m)}")
    alpha = state.alpha if lr is None else lr
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_params, new_m, new_v = [], [], []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"param {i}: gradient shape {g.shape} != parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"param {i}: non-finite gradient")
        m = b1 * state.m[i] + (1.0 - b1) * g
        v = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        new_params.append(p - alpha * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(alpha=state.alpha, beta1=b1, beta2=b2,
                                 eps=state.eps, t=t, m=new_m, v=new_v)
