from dataclasses import dataclass

import numpy as np

from common.errors import ConfigurationError, NumericError, ShapeError
from tensor_nn.mlp import ParamStore


@dataclass(frozen=True, eq=False)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: ParamStore, **kwargs) -> "AdamState":
        zeros = np.zeros_like(params.weights)
        return cls(zeros, zeros.copy(), 0, **kwargs)


def adam_step(
    params: ParamStore, grads: np.ndarray, opt: AdamState, lr: float
) -> tuple[ParamStore, AdamState]:
    """One bias-corrected Adam update; returns new params and optimizer state."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.weights.shape or opt.first_moment.shape != params.weights.shape:
        raise ShapeError(
            f"gradient shape {grads.shape} does not match parameters {params.weights.shape}"
        )
    if lr < 0:
        raise ConfigurationError(f"learning rate must be non-negative, got {lr}")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient passed to adam", term="grads")

    t = opt.step_count + 1
    m = opt.beta1 * opt.first_moment + (1.0 - opt.beta1) * grads
    v = opt.beta2 * opt.second_moment + (1.0 - opt.beta2) * grads * grads
    m_hat = m / (1.0 - opt.beta1**t)
    v_hat = v / (1.0 - opt.beta2**t)
    weights = params.weights - lr * m_hat / (np.sqrt(v_hat) + opt.eps)
    new_opt = AdamState(m, v, t, opt.beta1, opt.beta2, opt.eps)
    return params.with_weights(weights), new_opt
