"""
dense MLP numerics: flat parameter layout, forward pass, shared backprop and the Gaussian policy head.
"""

from dataclasses import dataclass

import numpy as np

from common.errors import ConfigurationError, NumericError, ShapeError

ACTIVATIONS = ("tanh",)
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = float(np.log(2.0 * np.pi))


def param_count(layer_dims) -> int:
    return sum(
        (fan_in + 1) * fan_out
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:])
    )


def _check_dims(layer_dims) -> tuple[int, ...]:
    try:
        dims = tuple(int(d) for d in layer_dims)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"layer dims must be integers, got {layer_dims!r}") from e
    if len(dims) < 2:
        raise ConfigurationError(f"need at least input and output dims, got {dims}")
    if any(d < 1 for d in dims):
        raise ConfigurationError(f"layer dims must be positive, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class ParamStore:
    """
    MLP weights as one flat float64 vector in layer-major order.

    layer l is a row-major (fan_in + 1, fan_out) block whose last row is the bias,
    so it occupies (fan_in + 1) * fan_out consecutive entries. Hidden layers use
    tanh, the output layer is linear. The weight array is read-only.
    """

    layer_dims: tuple[int, ...]
    weights: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        dims = _check_dims(self.layer_dims)
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unsupported activation {self.activation!r}")
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if weights.size != param_count(dims):
            raise ShapeError(
                f"expected {param_count(dims)} weights for dims {dims}, got {weights.size}"
            )
        if not np.all(np.isfinite(weights)):
            raise NumericError("non-finite parameter", term="weights")
        weights.setflags(write=False)
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", weights)

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def hidden_width(self) -> int:
        return self.layer_dims[1] if self.n_layers > 1 else self.layer_dims[0]

    @property
    def n_hidden(self) -> int:
        return self.n_layers - 1

    def layers(self) -> list[np.ndarray]:
        blocks = []
        start = 0
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            size = (fan_in + 1) * fan_out
            blocks.append(self.weights[start : start + size].reshape(fan_in + 1, fan_out))
            start += size
        return blocks

    def with_weights(self, weights: np.ndarray) -> "ParamStore":
        return ParamStore(self.layer_dims, weights, self.activation)

    def equals(self, other: "ParamStore") -> bool:
        """Bitwise equality of layout and weights."""
        return (
            self.layer_dims == other.layer_dims
            and self.activation == other.activation
            and self.weights.tobytes() == other.weights.tobytes()
        )


def init_params(seed: int, layer_dims) -> ParamStore:
    """
    uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases, deterministic per seed.
    """
    dims = _check_dims(layer_dims)
    rng = np.random.default_rng(seed)
    blocks = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        block = np.zeros((fan_in + 1, fan_out))
        block[:-1] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        blocks.append(block.ravel())
    return ParamStore(dims, np.concatenate(blocks))


def forward_cached(params: ParamStore, inputs: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward pass returning the output and every layer's activation (input first)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.layer_dims[0]:
        raise ShapeError(
            f"input of shape {x.shape} does not match input dim {params.layer_dims[0]}"
        )
    blocks = params.layers()
    activations = [x]
    h = x
    for l, block in enumerate(blocks):
        z = h @ block[:-1] + block[-1]
        h = np.tanh(z) if l < len(blocks) - 1 else z
        activations.append(h)
    return h, activations


def forward(params: ParamStore, inputs: np.ndarray) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        out, _ = forward_cached(params, x[None, :])
        return out[0]
    out, _ = forward_cached(params, x)
    return out


def backward(
    params: ParamStore, activations: list[np.ndarray], d_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    backprop d_out (gradient w.r.t. the linear output) through the net.

    returns the flat parameter gradient (same layout as params.weights) and the
    gradient w.r.t. the network input.
    """
    blocks = params.layers()
    grads: list[np.ndarray] = [None] * len(blocks)
    delta = np.asarray(d_out, dtype=np.float64)
    d_input = None
    for l in reversed(range(len(blocks))):
        block = blocks[l]
        g = np.empty_like(block)
        g[:-1] = activations[l].T @ delta
        g[-1] = delta.sum(axis=0)
        grads[l] = g.ravel()
        d_h = delta @ block[:-1].T
        if l > 0:
            delta = d_h * (1.0 - activations[l] ** 2)
        else:
            d_input = d_h
    return np.concatenate(grads), d_input


def gaussian_nll(mean: np.ndarray, log_std: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row negative log-likelihood and its gradient w.r.t. the mean."""
    inv_var = np.exp(-2.0 * log_std)
    diff = actions - mean
    dim = mean.shape[-1]
    nll = 0.5 * np.sum(diff * diff * inv_var, axis=-1) + np.sum(log_std) + 0.5 * dim * LOG_2PI
    return nll, -diff * inv_var


@dataclass(frozen=True, eq=False)
class GaussianPolicyHead:
    mean: np.ndarray
    log_std: np.ndarray

    def log_prob(self, actions: np.ndarray) -> np.ndarray:
        nll, _ = gaussian_nll(self.mean, self.log_std, np.asarray(actions, dtype=np.float64))
        return -nll

    def sample(self, rng: np.random.Generator, low: float, high: float) -> np.ndarray:
        noise = rng.standard_normal(self.mean.shape)
        return np.clip(self.mean + np.exp(self.log_std) * noise, low, high)


@dataclass(frozen=True, eq=False)
class GaussianPolicy:
    """pi(a | s, g): MLP mean over the encoded (state, goal) input, fixed state-independent log_std."""

    net: ParamStore
    log_std: np.ndarray

    def __post_init__(self):
        log_std = np.clip(np.array(self.log_std, dtype=np.float64).reshape(-1), LOG_STD_MIN, LOG_STD_MAX)
        if log_std.size != self.net.layer_dims[-1]:
            raise ShapeError(
                f"log_std has {log_std.size} entries for action dim {self.net.layer_dims[-1]}"
            )
        log_std.setflags(write=False)
        object.__setattr__(self, "log_std", log_std)

    @property
    def action_dim(self) -> int:
        return self.net.layer_dims[-1]

    def mean(self, inputs: np.ndarray) -> np.ndarray:
        return forward(self.net, inputs)

    def head(self, inputs: np.ndarray) -> GaussianPolicyHead:
        return GaussianPolicyHead(self.mean(inputs), self.log_std)

    def with_net(self, net: ParamStore) -> "GaussianPolicy":
        return GaussianPolicy(net, self.log_std)
