# ─────────────────────────────────────────────────────────────────────────────
# Lorenz trajectories, high-dimensional embedding, and measurement noise
# ─────────────────────────────────────────────────────────────────────────────

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import legendre

from lib.config import (
    LORENZ_BETA, LORENZ_RHO, LORENZ_SIGMA, BLOWUP_BOUND,
    TRAIN_X0, TEST_X0,
)
from lib.errors import DimensionError, DivergenceError, DomainError
from lib.timestepping import CLASSICAL_RK4, rk_step

logger = logging.getLogger(__name__)


# ─────────────────────────────────────────────────────────────────────────────
# Domain types
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LorenzParams:
    sigma: float = LORENZ_SIGMA
    rho: float = LORENZ_RHO
    beta: float = LORENZ_BETA

    def __post_init__(self):
        if min(self.sigma, self.rho, self.beta) <= 0:
            raise DomainError(f"Lorenz parameters must be positive: {self}")


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples of a trajectory: one row per time point."""

    t: np.ndarray
    x: np.ndarray
    dx: np.ndarray | None = None
    ddx: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        for name in ("dx", "ddx"):
            value = getattr(self, name)
            if value is not None:
                value = np.atleast_2d(np.asarray(value, dtype=np.float64))
                if value.shape != x.shape:
                    raise DimensionError(f"{name} shape {value.shape} != x shape {x.shape}")
                object.__setattr__(self, name, value)
        if x.shape[0] != t.size:
            raise DimensionError(f"{t.size} time points for {x.shape[0]} state rows")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DomainError("time grid must be strictly increasing")

    @property
    def n_samples(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def slice(self, start, stop):
        pick = lambda a: None if a is None else a[start:stop]
        return TimeSeries(self.t[start:stop], self.x[start:stop], pick(self.dx), pick(self.ddx))


@dataclass(frozen=True, eq=False)
class EmbeddingModes:
    """Spatial modes (d × n) onto which latent coordinates are projected."""

    modes: np.ndarray
    normalization: np.ndarray
    cubic_modes: np.ndarray | None = None

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=np.float64)
        norm = np.asarray(self.normalization, dtype=np.float64).reshape(-1)
        if norm.size != modes.shape[1]:
            raise DimensionError(f"{norm.size} normalization entries for {modes.shape[1]} modes")
        if np.any(norm == 0):
            raise DomainError("normalization entries must be nonzero")
        if np.linalg.matrix_rank(modes) < modes.shape[1]:
            raise DomainError("embedding modes are not linearly independent")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "normalization", norm)
        if self.cubic_modes is not None:
            cubic = np.asarray(self.cubic_modes, dtype=np.float64)
            if cubic.shape != modes.shape:
                raise DimensionError("cubic modes must have the same shape as the linear modes")
            object.__setattr__(self, "cubic_modes", cubic)

    @property
    def input_dim(self):
        return self.modes.shape[0]

    @property
    def latent_dim(self):
        return self.modes.shape[1]


@dataclass(frozen=True, eq=False)
class NoisyDataset:
    clean: TimeSeries
    observed: TimeSeries
    true_noise: np.ndarray
    noise_level: float
    seed: int
    params: dict = field(default_factory=dict)


# ─────────────────────────────────────────────────────────────────────────────
# Vector fields and integration
# ─────────────────────────────────────────────────────────────────────────────

def lorenz_rhs(state, p=LorenzParams()):
    x1, x2, x3 = state
    return np.array([
        p.sigma * (x2 - x1),
        x1 * (p.rho - x3) - x2,
        x1 * x2 - p.beta * x3,
    ])


def linear_decay_rhs(state):
    """ż = −z, the oracle system of the toy preset."""
    return -np.asarray(state, dtype=np.float64)


def _directional_derivative(rhs, x, v):
    """d/dt rhs(x(t)) along ẋ = v, by a central difference (exact for quadratic rhs)."""
    scale = max(1.0, float(np.linalg.norm(v)))
    eps = 1e-4 / scale
    return (np.asarray(rhs(x + eps * v)) - np.asarray(rhs(x - eps * v))) / (2 * eps)


def integrate_rk4(rhs, x0, t, second_derivative=False, bound=None):
    """
    Classical fixed-step RK4 over the grid `t`; dx is rhs evaluated at each sample.

    With `bound`, a state whose magnitude exceeds it (or turns non-finite)
    raises DivergenceError carrying the trajectory up to that point.
    """
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise DomainError("time grid must be strictly increasing")
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)

    x = np.empty((t.size, x0.size))
    x[0] = x0
    for k in range(t.size - 1):
        x[k + 1] = rk_step(rhs, x[k], t[k + 1] - t[k], CLASSICAL_RK4)
        if bound is not None and (not np.all(np.isfinite(x[k + 1])) or np.abs(x[k + 1]).max() > bound):
            partial = TimeSeries(t[: k + 1], x[: k + 1])
            raise DivergenceError(f"trajectory left |x| <= {bound:g} at t={t[k + 1]:.4g}", partial=partial)

    dx = np.array([rhs(row) for row in x], dtype=np.float64).reshape(x.shape)
    ddx = None
    if second_derivative:
        ddx = np.array([_directional_derivative(rhs, xr, vr) for xr, vr in zip(x, dx)])
    return TimeSeries(t, x, dx, ddx)


# ─────────────────────────────────────────────────────────────────────────────
# High-dimensional embedding
# ─────────────────────────────────────────────────────────────────────────────

def legendre_modes(input_dim, latent_dim, normalization, linear=True):
    """
    First `latent_dim` Legendre polynomials on a uniform grid over [−1, 1] as
    linear modes; the next `latent_dim` as cubic modes unless `linear`.
    """
    if input_dim < latent_dim:
        raise DimensionError(f"input_dim {input_dim} < latent_dim {latent_dim}")
    grid = np.linspace(-1, 1, input_dim)
    basis = np.column_stack([
        legendre.legval(grid, np.eye(2 * latent_dim)[k]) for k in range(2 * latent_dim)
    ])
    cubic = None if linear else basis[:, latent_dim:]
    return EmbeddingModes(basis[:, :latent_dim], normalization, cubic)


def normalize_latent(latent, normalization):
    """Scale latent coordinates (and their derivatives) by the normalization vector."""
    s = np.asarray(normalization, dtype=np.float64).reshape(1, -1)
    if s.shape[1] != latent.dim:
        raise DimensionError(f"{s.shape[1]} normalization entries for {latent.dim} coordinates")
    scale = lambda a: None if a is None else a * s
    return TimeSeries(latent.t, latent.x * s, scale(latent.dx), scale(latent.ddx))


def embed_highdim(latent, modes):
    """Map a latent trajectory into input_dim observations, derivatives by the chain rule."""
    if latent.dx is None:
        raise DomainError("latent series needs dx to be embedded")
    if latent.dim != modes.latent_dim:
        raise DimensionError(f"latent dim {latent.dim} != {modes.latent_dim} modes")

    z = normalize_latent(latent, modes.normalization)
    M = modes.modes
    x = z.x @ M.T
    dx = z.dx @ M.T
    ddx = None if z.ddx is None else z.ddx @ M.T

    if modes.cubic_modes is not None:
        C = modes.cubic_modes
        x = x + (z.x ** 3) @ C.T
        dx = dx + (3 * z.x ** 2 * z.dx) @ C.T
        if ddx is not None:
            ddx = ddx + (6 * z.x * z.dx ** 2 + 3 * z.x ** 2 * z.ddx) @ C.T
    return TimeSeries(latent.t, x, dx, ddx)


# ─────────────────────────────────────────────────────────────────────────────
# Measurement noise
# ─────────────────────────────────────────────────────────────────────────────

def add_noise(clean, level, seed):
    """
    Add iid Gaussian noise with std = level × std(all entries of clean.x).

    Derivative channels present in `clean` are noised the same way, each
    relative to its own global std.
    """
    if level < 0 or level >= 1:
        raise DomainError(f"noise level must lie in [0, 1), got {level}")
    rng = np.random.default_rng(seed)

    def draw(a):
        if level == 0:
            return np.zeros_like(a)
        return rng.normal(0.0, level * np.std(a), size=a.shape)

    noise = draw(clean.x)
    observed = replace(
        clean,
        x=clean.x + noise,
        dx=None if clean.dx is None else clean.dx + draw(clean.dx),
        ddx=None if clean.ddx is None else clean.ddx + draw(clean.ddx),
    )
    logger.debug("added %.1f%% noise (seed %d), std %.4g", 100 * level, seed, noise.std())
    return NoisyDataset(clean, observed, noise, float(level), int(seed))


# ─────────────────────────────────────────────────────────────────────────────
# Library size and ground-truth coefficients
# ─────────────────────────────────────────────────────────────────────────────

def library_size(n, poly_order, include_sine=False, include_constant=True):
    if n < 1:
        raise DomainError(f"library needs at least one variable, got {n}")
    if not 1 <= poly_order <= 5:
        raise DomainError(f"poly_order must be in 1..5, got {poly_order}")
    count = sum(math.comb(n + k - 1, k) for k in range(1, poly_order + 1))
    if include_constant:
        count += 1
    if include_sine:
        count += n
    return count


def lorenz_ground_truth_coefficients(normalization, poly_order=3, p=LorenzParams()):
    """Xi for the normalized Lorenz system in the order-1 library (constant included)."""
    n = np.asarray(normalization, dtype=np.float64).reshape(-1)
    if n.size != 3 or np.any(n == 0):
        raise DomainError("normalization must be three nonzero entries")
    if poly_order < 2:
        raise DomainError("the Lorenz system needs poly_order >= 2")
    Xi = np.zeros((library_size(3, poly_order, False, True), 3))
    Xi[1, 0] = -p.sigma
    Xi[2, 0] = p.sigma * n[0] / n[1]
    Xi[1, 1] = p.rho * n[1] / n[0]
    Xi[2, 1] = -1
    Xi[6, 1] = -n[1] / (n[0] * n[2])
    Xi[3, 2] = -p.beta
    Xi[5, 2] = n[2] / (n[0] * n[1])
    return Xi


# ─────────────────────────────────────────────────────────────────────────────
# Built-in trajectories
# ─────────────────────────────────────────────────────────────────────────────

SYSTEMS = {
    "lorenz": lambda params: (lambda s: lorenz_rhs(s, params)),
    "linear_decay": lambda params: linear_decay_rhs,
}


def system_rhs(name, params=LorenzParams()):
    if name not in SYSTEMS:
        raise DomainError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}")
    return SYSTEMS[name](params)


def training_trajectory(rhs, n_samples=30_000, t_end=20.0, x0=TRAIN_X0, second_derivative=False):
    t = np.linspace(0.0, t_end, n_samples)
    return integrate_rk4(rhs, x0, t, second_derivative=second_derivative, bound=BLOWUP_BOUND)


def evaluation_trajectory(rhs, dt=0.01, t_end=20.0, x0=TEST_X0, second_derivative=False):
    t = np.arange(0.0, t_end, dt)
    return integrate_rk4(rhs, x0, t, second_derivative=second_derivative, bound=BLOWUP_BOUND)
