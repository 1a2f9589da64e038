"""
the closed loss set with hand-written output gradients:
bc, iql_q, iql_v, awr and ddpg_bc. All losses are batch means.
"""

from dataclasses import dataclass, field

import numpy as np

from common.errors import ConfigurationError, NumericError, ShapeError
from tensor_nn.mlp import ParamStore, backward, forward_cached, gaussian_nll

LOSS_IDS = ("bc", "iql_q", "iql_v", "awr", "ddpg_bc")


@dataclass(frozen=True, eq=False)
class LossBatch:
    """
    rows for one loss evaluation.

    obs is the encoded (state, goal) input shared by policy and value nets; the Q
    net reads [obs, action]. targets are TD targets for iql_q and Q values for iql_v.
    """

    obs: np.ndarray
    actions: np.ndarray | None = None
    targets: np.ndarray | None = None
    q_scale: float = 1.0

    @property
    def size(self) -> int:
        return len(self.obs)


@dataclass(frozen=True)
class LossSettings:
    log_std: np.ndarray = field(default_factory=lambda: np.zeros(2))
    expectile: float = 0.9
    beta: float = 0.0
    weight_clip: float = 100.0


def expectile_weights(residuals: np.ndarray, expectile: float) -> np.ndarray:
    """|alpha - 1{x < 0}|"""
    return np.where(residuals < 0.0, 1.0 - expectile, expectile)


def advantage_weights(advantages: np.ndarray, beta: float, weight_clip: float) -> np.ndarray:
    z = np.minimum(beta * advantages, np.log(weight_clip) + 1.0)
    return np.minimum(np.exp(z), weight_clip)


def _require(batch: LossBatch, *names: str):
    for name in names:
        if getattr(batch, name) is None:
            raise ShapeError(f"loss batch is missing '{name}'")


def _bc(params, batch, settings, q_params, v_params):
    _require(batch, "actions")
    mean, acts = forward_cached(params, batch.obs)
    nll, d_mean = gaussian_nll(mean, settings.log_std, batch.actions)
    grad, _ = backward(params, acts, d_mean / batch.size)
    return nll.mean(), grad


def _iql_q(params, batch, settings, q_params, v_params):
    _require(batch, "actions", "targets")
    q, acts = forward_cached(params, np.concatenate([batch.obs, batch.actions], axis=1))
    resid = batch.targets - q[:, 0]
    grad, _ = backward(params, acts, (-2.0 * resid / batch.size)[:, None])
    return np.mean(resid * resid), grad


def _iql_v(params, batch, settings, q_params, v_params):
    _require(batch, "targets")
    v, acts = forward_cached(params, batch.obs)
    x = batch.targets - v[:, 0]
    w = expectile_weights(x, settings.expectile)
    grad, _ = backward(params, acts, (-2.0 * w * x / batch.size)[:, None])
    return np.mean(w * x * x), grad


def _awr(params, batch, settings, q_params, v_params):
    _require(batch, "actions")
    if q_params is None or v_params is None:
        raise ConfigurationError("awr needs both Q and V parameters")
    q, _ = forward_cached(q_params, np.concatenate([batch.obs, batch.actions], axis=1))
    v, _ = forward_cached(v_params, batch.obs)
    w = advantage_weights(q[:, 0] - v[:, 0], settings.beta, settings.weight_clip)
    mean, acts = forward_cached(params, batch.obs)
    nll, d_mean = gaussian_nll(mean, settings.log_std, batch.actions)
    grad, _ = backward(params, acts, w[:, None] * d_mean / batch.size)
    return np.mean(w * nll), grad


def _ddpg_bc(params, batch, settings, q_params, v_params):
    _require(batch, "actions")
    if q_params is None:
        raise ConfigurationError("ddpg_bc needs Q parameters")
    mean, acts = forward_cached(params, batch.obs)
    q, q_acts = forward_cached(q_params, np.concatenate([batch.obs, mean], axis=1))
    nll, d_mean = gaussian_nll(mean, settings.log_std, batch.actions)
    scale = settings.beta * batch.q_scale
    _, d_q_input = backward(q_params, q_acts, np.full((batch.size, 1), -scale / batch.size))
    d_mean = d_mean / batch.size + d_q_input[:, batch.obs.shape[1] :]
    grad, _ = backward(params, acts, d_mean)
    return np.mean(-scale * q[:, 0] + nll), grad


_LOSSES = {
    "bc": _bc,
    "iql_q": _iql_q,
    "iql_v": _iql_v,
    "awr": _awr,
    "ddpg_bc": _ddpg_bc,
}


def loss_and_grad(
    loss_id: str,
    params: ParamStore,
    batch: LossBatch,
    settings: LossSettings | None = None,
    q_params: ParamStore | None = None,
    v_params: ParamStore | None = None,
) -> tuple[float, np.ndarray]:
    """
    batch-mean loss and its gradient w.r.t. params.

    critics passed as q_params / v_params are treated as constants.
    """
    if loss_id not in _LOSSES:
        raise ConfigurationError(f"unknown loss id {loss_id!r}; expected one of {LOSS_IDS}")
    if batch.size == 0:
        raise ShapeError("empty loss batch")
    settings = settings or LossSettings()
    loss, grad = _LOSSES[loss_id](params, batch, settings, q_params, v_params)
    if not np.isfinite(loss):
        raise NumericError(f"{loss_id} loss is not finite", term=f"{loss_id}:loss")
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"{loss_id} gradient is not finite", term=f"{loss_id}:grad")
    return float(loss), grad
