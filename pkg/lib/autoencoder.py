# ─────────────────────────────────────────────────────────────────────────────
# SINDy autoencoder: encoder/decoder MLPs, analytic time-derivative
# propagation through the layers, and the four-term training loss
# ─────────────────────────────────────────────────────────────────────────────
#
# Loss weight naming (kept explicit to avoid index drift):
#   λ1 → decoder              reconstruction of x
#   λ2 → sindy_x              dx against the decoded SINDy prediction
#   λ3 → sindy_z              dz against the SINDy prediction
#   λ4 → sindy_regularization mean |mask ∘ Φ|

from dataclasses import dataclass

import numpy as np

from lib.autodiff import (
    Tensor, activation, add_bias, elementwise, matmul, mean_square, mul_const, reduce,
)
from lib.errors import ContractError, DimensionError, DomainError
from lib.network import MlpParams, init_mlp, layers, mlp_forward
from lib.sindy import SindyCoefficients, build_library, sindy_predict


@dataclass(frozen=True, eq=False)
class AutoencoderParams:
    encoder: MlpParams
    decoder: MlpParams

    def __post_init__(self):
        enc, dec = self.encoder.layer_sizes, self.decoder.layer_sizes
        if enc != dec[::-1]:
            raise DimensionError(f"decoder layers {dec} are not the reverse of encoder layers {enc}")

    @property
    def input_dim(self):
        return self.encoder.layer_sizes[0]

    @property
    def latent_dim(self):
        return self.encoder.layer_sizes[-1]

    @property
    def widths(self):
        return self.encoder.layer_sizes[1:-1]

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def with_parameters(self, flat):
        flat = list(flat)
        k = len(self.encoder.parameters())
        return AutoencoderParams(self.encoder.with_parameters(flat[:k]), self.decoder.with_parameters(flat[k:]))

    def numpy(self):
        return AutoencoderParams(self.encoder.numpy(), self.decoder.numpy())


def init_autoencoder(input_dim, latent_dim, widths, activation="sigmoid", rng=None):
    rng = rng if rng is not None else np.random.default_rng(0)
    if latent_dim > input_dim:
        raise DimensionError(f"latent_dim {latent_dim} exceeds input_dim {input_dim}")
    sizes = [input_dim, *widths, latent_dim]
    encoder = init_mlp(sizes, activation, rng)
    decoder = init_mlp(sizes[::-1], activation, rng)
    return AutoencoderParams(encoder, decoder)


@dataclass(frozen=True)
class LossWeights:
    decoder: float = 1.0                  # λ1
    sindy_x: float = 1e-4                 # λ2
    sindy_z: float = 0.0                  # λ3
    sindy_regularization: float = 1e-5    # λ4

    def __post_init__(self):
        for name in ("decoder", "sindy_x", "sindy_z", "sindy_regularization"):
            if getattr(self, name) < 0:
                raise DomainError(f"loss weight {name} must be non-negative")


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Every intermediate of one forward pass; ddx/ddz fields stay None for order 1."""

    x: Tensor
    dx: Tensor
    z: Tensor
    dz: Tensor
    x_decode: Tensor
    dx_decode: Tensor
    theta: Tensor
    sindy_predict: Tensor
    coefficients: SindyCoefficients
    ddx: Tensor | None = None
    ddz: Tensor | None = None
    ddx_decode: Tensor | None = None

    @property
    def model_order(self):
        return 1 if self.ddx is None else 2


# ─────────────────────────────────────────────────────────────────────────────
# Forward maps
# ─────────────────────────────────────────────────────────────────────────────

def _as_tensor(a):
    return a if isinstance(a, Tensor) else Tensor(np.atleast_2d(a))


def encode(x, autoencoder):
    return mlp_forward(_as_tensor(x), autoencoder.encoder)


def decode(z, autoencoder):
    return mlp_forward(_as_tensor(z), autoencoder.decoder)


def z_derivative(x, dx, net):
    """
    Push the velocity dx through `net` by the chain rule: v ← σ′(pre) ∘ (v·W)
    per hidden layer, v ← v·W on the linear output layer.
    """
    a, v = _as_tensor(x), _as_tensor(dx)
    if a.shape != v.shape:
        raise DimensionError(f"x {a.shape} and dx {v.shape} differ")
    for W, b, last in layers(net):
        if last:
            return matmul(v, W)
        pre = add_bias(matmul(a, W), b)
        v = elementwise("mul", activation(net.activation, pre, 1), matmul(v, W))
        a = activation(net.activation, pre)


def z_derivative_order2(x, dx, ddx, net):
    """
    First and second time derivatives through `net`:
    w ← σ″(pre) ∘ (v·W)² + σ′(pre) ∘ (w·W), v ← σ′(pre) ∘ (v·W).
    """
    a, v, w = _as_tensor(x), _as_tensor(dx), _as_tensor(ddx)
    if not a.shape == v.shape == w.shape:
        raise DimensionError(f"x {a.shape}, dx {v.shape} and ddx {w.shape} differ")
    for W, b, last in layers(net):
        if last:
            return matmul(v, W), matmul(w, W)
        pre = add_bias(matmul(a, W), b)
        vW, wW = matmul(v, W), matmul(w, W)
        d1 = activation(net.activation, pre, 1)
        d2 = activation(net.activation, pre, 2)
        w = elementwise("mul", d2, elementwise("square", vW)) + elementwise("mul", d1, wW)
        v = elementwise("mul", d1, vW)
        a = activation(net.activation, pre)


def forward_network(x, dx, autoencoder, coefficients, spec, ddx=None):
    """Run encoder, SINDy model and decoder on one batch."""
    x, dx = _as_tensor(x), _as_tensor(dx)
    if x.shape[1] != autoencoder.input_dim:
        raise DimensionError(f"batch has {x.shape[1]} columns, autoencoder expects {autoencoder.input_dim}")
    if autoencoder.latent_dim != spec.latent_dim:
        raise DimensionError(f"autoencoder latent_dim {autoencoder.latent_dim} != library latent_dim {spec.latent_dim}")

    z = encode(x, autoencoder)
    x_decode = decode(z, autoencoder)

    if spec.model_order == 1:
        dz = z_derivative(x, dx, autoencoder.encoder)
        theta = build_library(z, spec)
        predicted = sindy_predict(theta, coefficients)
        dx_decode = z_derivative(z, predicted, autoencoder.decoder)
        return NetworkState(x, dx, z, dz, x_decode, dx_decode, theta, predicted, coefficients)

    if ddx is None:
        raise ContractError("second-order models need ddx")
    ddx = _as_tensor(ddx)
    dz, ddz = z_derivative_order2(x, dx, ddx, autoencoder.encoder)
    theta = build_library(z, spec, dz)
    predicted = sindy_predict(theta, coefficients)
    dx_decode, ddx_decode = z_derivative_order2(z, dz, predicted, autoencoder.decoder)
    return NetworkState(x, dx, z, dz, x_decode, dx_decode, theta, predicted, coefficients,
                        ddx=ddx, ddz=ddz, ddx_decode=ddx_decode)


# ─────────────────────────────────────────────────────────────────────────────
# Losses
# ─────────────────────────────────────────────────────────────────────────────

LOSS_NAMES = ("decoder", "sindy_z", "sindy_x", "sindy_regularization", "total", "refinement")


def assemble_losses(state, w, spec):
    """
    Scalar loss Tensors keyed by LOSS_NAMES. For second-order models the
    SINDy terms compare second derivatives.
    """
    if state.model_order != spec.model_order:
        raise ContractError(f"state of order {state.model_order} for a spec of order {spec.model_order}")
    if spec.model_order == 1:
        z_target, x_target, x_predicted = state.dz, state.dx, state.dx_decode
    else:
        z_target, x_target, x_predicted = state.ddz, state.ddx, state.ddx_decode

    coeffs = state.coefficients
    phi = coeffs.phi if isinstance(coeffs.phi, Tensor) else Tensor(coeffs.phi)
    masked = mul_const(phi, coeffs.mask.astype(np.float64))

    losses = {
        "decoder": mean_square(state.x - state.x_decode),
        "sindy_z": mean_square(z_target - state.sindy_predict),
        "sindy_x": mean_square(x_target - x_predicted),
        "sindy_regularization": reduce("mean", elementwise("abs", masked)),
    }
    refinement = (
        mul_const(losses["decoder"], w.decoder)
        + mul_const(losses["sindy_z"], w.sindy_z)
        + mul_const(losses["sindy_x"], w.sindy_x)
    )
    losses["refinement"] = refinement
    losses["total"] = refinement + mul_const(losses["sindy_regularization"], w.sindy_regularization)
    return losses


def loss_values(losses):
    return {name: losses[name].item() for name in LOSS_NAMES}
