# ─────────────────────────────────────────────────────────────────────────────
# Dense feed-forward networks shared by the denoiser and the autoencoder
# ─────────────────────────────────────────────────────────────────────────────

from dataclasses import dataclass

import numpy as np

from lib.autodiff import Tensor, activation, add_bias, matmul
from lib.config import ACTIVATIONS
from lib.errors import ContractError, DimensionError


@dataclass(frozen=True, eq=False)
class MlpParams:
    """
    Weights W_l (in × out) and biases b_l (out,) of an MLP.

    Hidden layers apply `activation`; the last layer is linear. Entries may be
    numpy arrays (stored parameters) or Tensors (leaves of a training tape).
    """

    weights: tuple
    biases: tuple
    activation: str = "elu"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "biases", tuple(self.biases))
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"unsupported activation {self.activation!r}")
        if not self.weights or len(self.weights) != len(self.biases):
            raise DimensionError("an MLP needs one bias per weight matrix")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if len(W.shape) != 2 or b.shape != (W.shape[1],):
                raise DimensionError(f"layer {l}: weight {W.shape} does not match bias {b.shape}")
            if l and self.weights[l - 1].shape[1] != W.shape[0]:
                raise DimensionError(f"layer {l}: input {W.shape[0]} != previous output")

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n_layers(self):
        return len(self.weights)

    def parameters(self):
        """Flat list W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def with_parameters(self, flat):
        flat = list(flat)
        return MlpParams(tuple(flat[0::2]), tuple(flat[1::2]), self.activation)

    def numpy(self):
        as_array = lambda p: np.array(p.data if isinstance(p, Tensor) else p, dtype=np.float64)
        return self.with_parameters([as_array(p) for p in self.parameters()])


def xavier_uniform(fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_mlp(layer_sizes, activation="elu", rng=None):
    """Xavier-uniform weights, zero biases."""
    rng = rng if rng is not None else np.random.default_rng(0)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(xavier_uniform(fan_in, fan_out, rng))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(weights), tuple(biases), activation)


def _t(p):
    return p if isinstance(p, Tensor) else Tensor(p)


def layers(params):
    """(W, b, is_last) triples as Tensors."""
    n = params.n_layers
    return [(_t(W), _t(b), l == n - 1) for l, (W, b) in enumerate(zip(params.weights, params.biases))]


def mlp_forward(x, params):
    a = _t(x)
    for W, b, last in layers(params):
        pre = add_bias(matmul(a, W), b)
        a = pre if last else activation(params.activation, pre)
    return a
