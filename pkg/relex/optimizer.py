"""
Adam updates for dense parameters and row-sparse embedding gradients.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple, Union

import numpy as np

from relex.network import Gradients, ModelParams

logger = logging.getLogger(__name__)

DEFAULT_LR = 1e-3
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


class NonFiniteGradientError(FloatingPointError):
    """Raised when a gradient contains NaN or infinity."""


@dataclass
class AdamState:
    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


ParamsLike = Union[ModelParams, Mapping[str, np.ndarray]]


def _named_arrays(params: ParamsLike) -> Mapping[str, np.ndarray]:
    return params.named_arrays() if isinstance(params, ModelParams) else params


def validate_hyperparameters(lr: float, beta1: float, beta2: float, eps: float) -> None:
    if not lr > 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not 0.0 <= beta1 < 1.0:
        raise ValueError(f"beta1 must be in [0, 1), got {beta1}")
    if not 0.0 <= beta2 < 1.0:
        raise ValueError(f"beta2 must be in [0, 1), got {beta2}")
    if not eps > 0.0:
        raise ValueError(f"epsilon must be positive, got {eps}")


def adam_init(
    params: ParamsLike,
    lr: float = DEFAULT_LR,
    beta1: float = DEFAULT_BETA1,
    beta2: float = DEFAULT_BETA2,
    eps: float = DEFAULT_EPS,
) -> AdamState:
    validate_hyperparameters(lr, beta1, beta2, eps)
    arrays = _named_arrays(params)
    return AdamState(
        lr, beta1, beta2, eps, 0,
        {name: np.zeros_like(a) for name, a in arrays.items()},
        {name: np.zeros_like(a) for name, a in arrays.items()},
    )


def _check_finite(grads: Gradients) -> None:
    for name, grad in grads.dense.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(f"non-finite gradient for '{name}' (max |g| = {np.nanmax(np.abs(grad))})")
    for name, rows in grads.sparse.items():
        if not np.all(np.isfinite(rows.values)):
            bad = rows.ids[~np.all(np.isfinite(rows.values), axis=1)]
            raise NonFiniteGradientError(f"non-finite gradient for '{name}' rows {bad[:10].tolist()}")


def adam_step(state: AdamState, grads: Gradients, params: ParamsLike) -> Tuple[ParamsLike, AdamState]:
    """
    One Adam update, applied in place.

    Embedding rows are updated lazily: only rows with a nonzero entry in
    the sparse gradient move, and only their moments are decayed. Bias
    correction uses the global step count.
    """
    _check_finite(grads)
    arrays = _named_arrays(params)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t

    for name, grad in grads.dense.items():
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        arrays[name] -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)

    for name, rows in grads.sparse.items():
        touched = np.any(rows.values != 0.0, axis=1)
        if not touched.any():
            continue
        ids, grad = rows.ids[touched], rows.values[touched]
        m = b1 * state.m[name][ids] + (1.0 - b1) * grad
        v = b2 * state.v[name][ids] + (1.0 - b2) * grad * grad
        state.m[name][ids] = m
        state.v[name][ids] = v
        arrays[name][ids] -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)

    return params, state
