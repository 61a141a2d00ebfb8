"""
Flight Stack - Optimization Helpers
Adam with bias correction, global-norm clipping and the mean-squared-error loss
"""

from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from ..utils import NetworkShapeError


@dataclass(frozen=True, eq=False)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, learning_rate: float = 1e-3, **kwargs) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, learning_rate, **kwargs)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> Tuple[np.ndarray, AdamState]:
    """
    One Adam update with bias correction

    Moments are kept in float64; the returned parameters keep the input dtype.
    """
    params = np.asarray(params)
    grads = np.asarray(grads, dtype=np.float64)
    if not (params.shape == grads.shape == state.first_moment.shape):
        raise NetworkShapeError("Adam parameters, gradients and moments must align",
                                expected=state.first_moment.shape, received=(params.shape, grads.shape))

    step = state.step + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    update = state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    new_params = (params.astype(np.float64) - update).astype(params.dtype)
    return new_params, replace(state, first_moment=m, second_moment=v, step=step)


def global_norm_clip(grads: np.ndarray, max_norm: float) -> Tuple[np.ndarray, float]:
    """Scale gradients down so their L2 norm is at most max_norm; returns (grads, original norm)"""
    norm = float(np.sqrt(np.sum(np.square(grads, dtype=np.float64))))
    if max_norm > 0 and norm > max_norm:
        return (grads * (max_norm / norm)).astype(grads.dtype), norm
    return grads, norm


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean over all elements of the squared error, with its gradient w.r.t. pred"""
    diff = np.asarray(pred) - np.asarray(target, dtype=np.asarray(pred).dtype)
    loss = float(np.mean(np.square(diff, dtype=np.float64)))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(diff.dtype)
