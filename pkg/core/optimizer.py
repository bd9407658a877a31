"""Adam update on numpy parameter arrays."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.errors import FitError, NonFiniteGradientError
from core.fit_config import FitConfig


@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates plus the step counter"""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(params, dtype=np.float64), np.zeros_like(params, dtype=np.float64), 0)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    config: FitConfig,
    iteration: Optional[int] = None,
) -> Tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched"""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise FitError(
            f"parameter shape {params.shape}, gradient shape {grads.shape} "
            f"and state shape {state.m.shape} disagree",
            iteration=iteration,
        )
    if not np.all(np.isfinite(grads)):
        raise NonFiniteGradientError("gradient contains non-finite values", iteration=iteration)

    beta1, beta2 = config.adam_beta1, config.adam_beta2
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads ** 2
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    updated = params - config.adam_alpha * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return updated, AdamState(m, v, t)
