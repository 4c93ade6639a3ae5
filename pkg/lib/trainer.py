# ─────────────────────────────────────────────────────────────────────────────
# Training loop: shuffled minibatch Adam, sequential thresholding of Φ, and a
# refinement phase that drops the sparsity penalty with the mask frozen
# ─────────────────────────────────────────────────────────────────────────────

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from lib.autodiff import Tape, grad
from lib.autoencoder import LOSS_NAMES, LossWeights, assemble_losses, forward_network, init_autoencoder, loss_values
from lib.config import ACTIVATIONS
from lib.errors import ContractError, DimensionError, DivergenceError, DomainError, NumericError
from lib.optim import adam_init, optimizer_step, reset_moments
from lib.sindy import COEFFICIENT_INITIALIZATIONS, SindyCoefficients, apply_threshold, init_coefficients

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 5001
    refinement_epochs: int = 1001
    batch_size: int = 1024
    learning_rate: float = 1e-3
    threshold: float = 0.1
    threshold_frequency: int = 500
    sequential_thresholding: bool = True
    seed: int = 0
    print_frequency: int = 100
    loss_weights: LossWeights = field(default_factory=LossWeights)
    activation: str = "sigmoid"
    widths: tuple = (64, 32)
    coefficient_initialization: str = "constant"
    specified_coefficients: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.max_epochs < 0 or self.refinement_epochs < 0 or self.max_epochs + self.refinement_epochs < 1:
            raise DomainError("need at least one training epoch")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.threshold_frequency < 1 or self.print_frequency < 1:
            raise DomainError("threshold_frequency and print_frequency must be >= 1")
        if self.learning_rate < 0 or self.threshold < 0:
            raise DomainError("learning_rate and threshold must be non-negative")
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"unsupported activation {self.activation!r}")
        if self.coefficient_initialization not in COEFFICIENT_INITIALIZATIONS:
            raise DomainError(f"unknown coefficient initialization {self.coefficient_initialization!r}")

    @property
    def total_epochs(self):
        return self.max_epochs + self.refinement_epochs


def _preflight(data, spec, cfg):
    if data.dx is None:
        raise DomainError("training data needs dx")
    if spec.model_order == 2 and data.ddx is None:
        raise DomainError("second-order training needs ddx")
    if spec.latent_dim > data.dim:
        raise DimensionError(f"latent_dim {spec.latent_dim} exceeds input dimension {data.dim}")
    if cfg.batch_size > data.n_samples:
        raise DimensionError(f"batch_size {cfg.batch_size} exceeds the {data.n_samples} training samples")


def _losses(params, mask, template, spec, weights, x, dx, ddx):
    autoencoder = template.with_parameters(params[:-1])
    state = forward_network(x, dx, autoencoder, SindyCoefficients(params[-1], mask), spec, ddx=ddx)
    return assemble_losses(state, weights, spec)


def _gradients(params, mask, template, spec, cfg, batch, objective):
    with Tape() as tape:
        leaves = [tape.variable(p) for p in params]
        loss = _losses(leaves, mask, template, spec, cfg.loss_weights, *batch)[objective]
    return [g.data for g in grad(loss, leaves)]


def history_frame(records):
    columns = ["epoch", "phase", *LOSS_NAMES, "active", "wall_clock"]
    return pd.DataFrame(records, columns=columns).set_index("epoch")


def train(data, spec, cfg):
    """
    Fit an autoencoder and sparse SINDy coefficients to `data`.

    Returns (AutoencoderParams, SindyCoefficients, history DataFrame). The
    history holds one row per logged epoch, evaluated on the full data set.
    """
    _preflight(data, spec, cfg)
    rng = np.random.default_rng(cfg.seed)
    autoencoder = init_autoencoder(data.dim, spec.latent_dim, cfg.widths, cfg.activation, rng)
    coeffs = init_coefficients(spec, cfg.coefficient_initialization, rng, cfg.specified_coefficients)

    params = autoencoder.parameters() + [coeffs.phi]
    phi_index = len(params) - 1
    mask = coeffs.mask
    adam = adam_init(params)

    full = (data.x, data.dx, data.ddx if spec.model_order == 2 else None)
    pick = lambda a, idx: None if a is None else a[idx]
    m, b = data.n_samples, cfg.batch_size
    n_batches = m // b
    records = []
    start = time.perf_counter()
    logger.info("training on %d samples × %d: %d batches per epoch, %d + %d epochs",
                m, data.dim, n_batches, cfg.max_epochs, cfg.refinement_epochs)

    for epoch in range(cfg.total_epochs):
        refining = epoch >= cfg.max_epochs
        objective = "refinement" if refining else "total"
        order = rng.permutation(m)
        try:
            for k in range(n_batches):
                idx = order[k * b: (k + 1) * b]
                batch = tuple(pick(a, idx) for a in full)
                grads = _gradients(params, mask, autoencoder, spec, cfg, batch, objective)
                params, adam = optimizer_step(params, grads, adam, cfg.learning_rate)

            if (not refining and cfg.sequential_thresholding and epoch > 0
                    and epoch % cfg.threshold_frequency == 0):
                before = int(mask.sum())
                mask = apply_threshold(SindyCoefficients(params[phi_index], mask), cfg.threshold).mask
                adam = reset_moments(adam, phi_index, mask)
                logger.info("epoch %d: thresholding kept %d of %d coefficients", epoch, int(mask.sum()), before)

            if epoch % cfg.print_frequency == 0 or epoch == cfg.total_epochs - 1:
                values = loss_values(_losses(params, mask, autoencoder, spec, cfg.loss_weights, *full))
                records.append({
                    "epoch": epoch, "phase": "refinement" if refining else "training", **values,
                    "active": int(mask.sum()), "wall_clock": time.perf_counter() - start,
                })
                logger.info("epoch %5d  %s  total %.4e  decoder %.4e  sindy_x %.4e  sindy_z %.4e  reg %.4e  active %d",
                            epoch, objective, values["total"], values["decoder"], values["sindy_x"],
                            values["sindy_z"], values["sindy_regularization"], int(mask.sum()))
        except NumericError as exc:
            raise DivergenceError(f"training diverged at epoch {epoch}: {exc}",
                                  partial=history_frame(records)) from exc

    final = autoencoder.with_parameters(params[:-1]).numpy()
    return final, SindyCoefficients(np.array(params[phi_index]), mask), history_frame(records)
