"""Adam on flat parameter vectors."""
from dataclasses import dataclass, replace

import numpy as np

from utils.errors import InvalidInputError


@dataclass(frozen=True)
class AdamState:
    """Moment accumulators and step counter; t counts completed steps."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> 'AdamState':
        return cls(m=np.zeros(size), v=np.zeros(size), t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise InvalidInputError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )

    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads

    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    return new_params, replace(state, m=m, v=v, t=t)
