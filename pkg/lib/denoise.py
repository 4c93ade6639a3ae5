# ─────────────────────────────────────────────────────────────────────────────
# Noise separation: learn N and a neural vector field f jointly by requiring
# Runge-Kutta predictions on Y − N to agree forwards and backwards in time
# ─────────────────────────────────────────────────────────────────────────────
#
# Inside this module observations are kept as rows (m samples × d coordinates),
# matching TimeSeries. NoiseEstimate exposes N in the d × m orientation.

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from lib.autodiff import Tape, Tensor, grad, half_sum_square, mean_square, mul_const, reduce, take_rows
from lib.config import FLOAT_FORMAT
from lib.data_loaders import save_matrix, save_series
from lib.dynamics import TimeSeries
from lib.errors import DimensionError, DivergenceError, DomainError, NumericError
from lib.network import MlpParams, init_mlp, mlp_forward
from lib.optim import adam_init, minimize_lbfgs, optimizer_step, pack, shapes_of, unpack
from lib.timestepping import THREE_EIGHTHS, rk_timestep

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DenoiseConfig:
    num_dt: int = 10
    gamma: float = 1e-5
    beta_reg: float = 1e-8
    weight_decay: str = "exp"
    decay_const: float = 0.9
    hidden_layers: int = 3
    hidden_width: int = 64
    activation: str = "elu"
    optimizer: str = "lbfgs"
    max_iter: int = 50_000
    gtol: float = 1e-11
    ftol: float = 1e-15
    max_ls: int = 100
    history_size: int = 10
    learning_rate: float = 1e-3
    init_window: int = 7
    print_frequency: int = 100

    def __post_init__(self):
        if self.num_dt < 1:
            raise DomainError(f"num_dt must be >= 1, got {self.num_dt}")
        if self.gamma < 0 or self.beta_reg < 0:
            raise DomainError("gamma and beta_reg must be non-negative")
        if self.weight_decay not in ("exp", "linear"):
            raise DomainError(f"weight_decay must be exp or linear, got {self.weight_decay!r}")
        if not 0 < self.decay_const <= 1:
            raise DomainError(f"decay_const must lie in (0, 1], got {self.decay_const}")
        if self.hidden_layers < 0 or self.hidden_width < 1:
            raise DomainError("hidden_layers must be >= 0 and hidden_width >= 1")
        if self.optimizer not in ("lbfgs", "adam"):
            raise DomainError(f"optimizer must be lbfgs or adam, got {self.optimizer!r}")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")

    def prediction_weights(self):
        j = np.arange(self.num_dt)
        if self.weight_decay == "exp":
            return self.decay_const ** j
        return 1.0 / (1.0 + j)


@dataclass(frozen=True, eq=False)
class NoiseEstimate:
    """N as a d × m matrix, column k aligned with observation k."""

    N: np.ndarray

    def __post_init__(self):
        N = np.atleast_2d(np.asarray(self.N, dtype=np.float64))
        if not np.all(np.isfinite(N)):
            raise NumericError("noise estimate has non-finite entries")
        object.__setattr__(self, "N", N)

    @property
    def rows(self):
        """Samples as rows (m × d)."""
        return self.N.T

    def interior(self, num_dt):
        """Columns that receive a fidelity signal."""
        return self.N[:, num_dt: self.N.shape[1] - num_dt]


class DenoiseResult(NamedTuple):
    denoised: TimeSeries
    noise: NoiseEstimate
    net: MlpParams
    history: pd.DataFrame


# ─────────────────────────────────────────────────────────────────────────────
# Initial guess
# ─────────────────────────────────────────────────────────────────────────────

def init_noise_estimate(Y, window=7):
    """N̂ = Y − moving average of each row of Y (d × m), edges mirrored."""
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if window < 3 or window % 2 == 0:
        raise DomainError(f"smoothing window must be odd and >= 3, got {window}")
    if window > Y.shape[1]:
        raise DomainError(f"smoothing window {window} exceeds series length {Y.shape[1]}")
    half = window // 2
    padded = np.pad(Y, ((0, 0), (half, half)), mode="reflect")
    smooth = sliding_window_view(padded, window, axis=1).mean(axis=-1)
    return NoiseEstimate(Y - smooth)


# ─────────────────────────────────────────────────────────────────────────────
# Objective
# ─────────────────────────────────────────────────────────────────────────────

def _noise_rows(N, shape):
    if isinstance(N, NoiseEstimate):
        N = Tensor(N.rows)
    elif not isinstance(N, Tensor):
        N = Tensor(N)
    if N.shape != shape:
        raise DimensionError(f"noise rows {N.shape} do not match observations {shape}")
    return N


def denoise_objective(Y, T, H, params, N, cfg):
    """
    Forward/backward prediction fidelity plus weight and noise penalties.

    `Y` holds observations as rows (m × d); `N` is a NoiseEstimate or a
    Tensor of noise rows (the form the optimizer differentiates).
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    m, _ = Y.shape
    q = cfg.num_dt
    if m <= 2 * q:
        raise DomainError(f"{m} samples cannot support num_dt={q} (need more than {2 * q})")
    if np.size(T) != m:
        raise DimensionError(f"{np.size(T)} time points for {m} samples")
    H = np.asarray(H, dtype=np.float64).reshape(-1)
    if H.size != m - 1:
        raise DimensionError(f"{H.size} step sizes for {m} samples")

    N_rows = _noise_rows(N, Y.shape)
    n_int = m - 2 * q
    f = lambda X: mlp_forward(X, params)

    X0 = Tensor(Y[q: m - q]) - take_rows(N_rows, q, m - q)
    forward, backward = X0, X0
    fidelity = None
    for j, w in enumerate(cfg.prediction_weights()):
        forward = rk_timestep(forward, f, H[q + j: q + j + n_int], "forward", THREE_EIGHTHS)
        backward = rk_timestep(backward, f, H[q - 1 - j: q - 1 - j + n_int], "backward", THREE_EIGHTHS)

        ahead = q + 1 + j
        behind = q - 1 - j
        err_f = Tensor(Y[ahead: ahead + n_int]) - (forward + take_rows(N_rows, ahead, ahead + n_int))
        err_b = Tensor(Y[behind: behind + n_int]) - (backward + take_rows(N_rows, behind, behind + n_int))
        term = mul_const(mean_square(err_f) + mean_square(err_b), w)
        fidelity = term if fidelity is None else fidelity + term

    weight_terms = [half_sum_square(W if isinstance(W, Tensor) else Tensor(W)) for W in params.weights]
    weights_regularizer = weight_terms[0]
    for term in weight_terms[1:]:
        weights_regularizer = weights_regularizer + term
    weights_regularizer = mul_const(weights_regularizer, 1.0 / len(weight_terms))
    noise_regularizer = half_sum_square(N_rows)

    return fidelity + mul_const(weights_regularizer, cfg.beta_reg) + mul_const(noise_regularizer, cfg.gamma)


# ─────────────────────────────────────────────────────────────────────────────
# Optimization
# ─────────────────────────────────────────────────────────────────────────────

class _Problem:
    """Flat-vector view of (network parameters, N) for the optimizers."""

    def __init__(self, Y, T, net, N_rows, cfg):
        self.Y, self.T, self.cfg = Y, T, cfg
        self.H = np.diff(T)
        self.template = net
        arrays = net.parameters() + [N_rows]
        self.shapes = shapes_of(arrays)
        self.x0 = pack(arrays)
        self.n_evals = 0

    def split(self, vector):
        parts = unpack(vector, self.shapes)
        return self.template.with_parameters(parts[:-1]), parts[-1]

    def loss_and_grad(self, vector):
        self.n_evals += 1
        try:
            with Tape() as tape:
                leaves = [tape.variable(p) for p in unpack(vector, self.shapes)]
                net = self.template.with_parameters(leaves[:-1])
                loss = denoise_objective(self.Y, self.T, self.H, net, leaves[-1], self.cfg)
            grads = grad(loss, leaves)
        except NumericError:
            return np.inf, np.zeros_like(vector)
        return loss.item(), pack([g.data for g in grads])


def _log_progress(cfg):
    def callback(it, f):
        if it % cfg.print_frequency == 0:
            logger.info("denoise iteration %6d  loss %.6e", it, f)
    return callback


def _run_lbfgs(problem, cfg):
    result = minimize_lbfgs(
        problem.loss_and_grad, problem.x0, max_iter=cfg.max_iter, history_size=cfg.history_size,
        gtol=cfg.gtol, ftol=cfg.ftol, max_ls=cfg.max_ls, callback=_log_progress(cfg),
    )
    logger.info("L-BFGS stopped after %d iterations (%d evaluations): %s",
                result.n_iter, result.n_evals, result.message)
    return result.x, result.history


def _run_adam(problem, cfg):
    x = problem.x0
    f, g = problem.loss_and_grad(x)
    if not np.isfinite(f):
        raise DivergenceError("denoising objective is not finite at the starting point", partial=x)
    best_x, best_f = x, f
    history = [f]
    state = adam_init([x])
    log = _log_progress(cfg)
    for it in range(cfg.max_iter):
        (x,), state = optimizer_step([x], [g], state, cfg.learning_rate)
        f, g = problem.loss_and_grad(x)
        if not np.isfinite(f):
            raise DivergenceError(f"denoising loss diverged at iteration {it}", partial=best_x)
        if f < best_f:
            best_x, best_f = x, f
        history.append(best_f)
        log(it, best_f)
        if np.abs(g).max() <= cfg.gtol:
            break
    return best_x, history


def _directional_difference(f, X, V):
    """Row-wise d/dt f(x(t)) along ẋ = v, by central differences."""
    scale = np.maximum(1.0, np.linalg.norm(V, axis=1, keepdims=True))
    eps = 1e-4 / scale
    return (f(X + eps * V) - f(X - eps * V)) / (2 * eps)


def separate_noise(observed, cfg, seed=0):
    """
    Jointly fit N and a vector-field network to the observed series.

    Returns DenoiseResult(denoised, noise, net, history). The denoised series
    is X = Y − N with dx from the learned network and ddx by a directional
    difference of it. Deterministic for a given seed.
    """
    Y = observed.x
    m, d = Y.shape
    if m < 2 * cfg.num_dt + 2:
        raise DomainError(f"need at least {2 * cfg.num_dt + 2} samples for num_dt={cfg.num_dt}, got {m}")

    rng = np.random.default_rng(seed)
    sizes = [d] + [cfg.hidden_width] * cfg.hidden_layers + [d]
    net0 = init_mlp(sizes, cfg.activation, rng)
    N0 = init_noise_estimate(Y.T, cfg.init_window).rows
    problem = _Problem(Y, observed.t, net0, N0, cfg)
    logger.info("denoising %d samples × %d with %s (%d parameters)",
                m, d, cfg.optimizer, problem.x0.size)

    runner = _run_lbfgs if cfg.optimizer == "lbfgs" else _run_adam
    best, losses = runner(problem, cfg)
    net, N_rows = problem.split(best)

    X = Y - N_rows
    vector_field = lambda A: mlp_forward(A, net).numpy()
    dx = vector_field(X)
    ddx = _directional_difference(vector_field, X, dx)

    history = pd.DataFrame({"loss": losses})
    history["best_loss"] = history["loss"].cummin()
    history.index.name = "iteration"
    logger.info("denoising finished: loss %.6e, |N|/|Y| = %.4f",
                history["best_loss"].iloc[-1], np.linalg.norm(N_rows) / np.linalg.norm(Y))
    return DenoiseResult(TimeSeries(observed.t, X, dx, ddx), NoiseEstimate(N_rows.T), net, history)


def save_denoise_result(result, directory):
    """noise.csv, denoised/ series, loss_history.csv and the network weights."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(result.noise.rows, directory / "noise.csv", prefix="n")
    save_series(result.denoised, directory / "denoised")
    result.history.to_csv(directory / "loss_history.csv", float_format=FLOAT_FORMAT)
    for l, (W, b) in enumerate(zip(result.net.weights, result.net.biases)):
        save_matrix(W, directory / "net" / f"W{l}.csv")
        save_matrix(b[None, :], directory / "net" / f"b{l}.csv")
