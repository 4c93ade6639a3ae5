# ─────────────────────────────────────────────────────────────────────────────
# Explicit Runge–Kutta time stepping (tape-aware and plain numpy variants)
# ─────────────────────────────────────────────────────────────────────────────

import math
from dataclasses import dataclass

import numpy as np

from lib.autodiff import Tensor, mul_const
from lib.config import RK4_A, RK4_B, RK38_A, RK38_B
from lib.errors import DimensionError, DomainError


@dataclass(frozen=True)
class RkScheme:
    """Butcher tableau of an explicit scheme: A strictly lower triangular, Σb = 1."""

    b: tuple
    A: tuple
    name: str = "custom"

    def __post_init__(self):
        if len(self.A) != len(self.b):
            raise DimensionError(f"{self.name}: {len(self.A)} rows of A for {len(self.b)} stages")
        for i, row in enumerate(self.A):
            if len(row) != i:
                raise DimensionError(f"{self.name}: row {i} of A must have {i} entries")
        if not math.isclose(sum(self.b), 1.0, rel_tol=0, abs_tol=1e-14):
            raise DomainError(f"{self.name}: stage weights sum to {sum(self.b)}, not 1")

    @property
    def stages(self):
        return len(self.b)


THREE_EIGHTHS = RkScheme(b=RK38_B, A=RK38_A, name="rk4-3/8")
CLASSICAL_RK4 = RkScheme(b=RK4_B, A=RK4_A, name="rk4")


def _step_sizes(h, n_rows):
    h = np.asarray(h, dtype=np.float64)
    if np.any(h <= 0):
        raise DomainError("time steps must be positive")
    if h.ndim == 0 or h.size == 1:
        return float(h.reshape(-1)[0])
    h = h.reshape(-1)
    if h.size != n_rows:
        raise DimensionError(f"{h.size} step sizes for {n_rows} states")
    return h[:, None]


def rk_timestep(x, f, h, direction="forward", scheme=THREE_EIGHTHS):
    """
    One explicit RK step per row of `x`, each row with its own step size.

    `f` maps a Tensor of states (rows) to their time derivatives. With
    direction="backward" every stage evaluates −f, i.e. the step integrates
    backwards in time. f must not depend on t.
    """
    if direction not in ("forward", "backward"):
        raise DomainError(f"direction must be forward or backward, got {direction!r}")
    if not isinstance(x, Tensor):
        x = Tensor(x)
    hc = _step_sizes(h, x.shape[0])
    if isinstance(hc, np.ndarray):
        hc = np.broadcast_to(hc, x.shape)

    stages = []
    for i in range(scheme.stages):
        xi = x
        for j, a in enumerate(scheme.A[i]):
            if a != 0:
                xi = xi + mul_const(stages[j], hc * a)
        k = f(xi)
        stages.append(-k if direction == "backward" else k)

    out = x
    for j, bj in enumerate(scheme.b):
        out = out + mul_const(stages[j], hc * bj)
    return out


def rk_step(rhs, x, h, scheme=CLASSICAL_RK4):
    """Plain numpy step for reference integration; `rhs` maps a state vector to its derivative."""
    stages = []
    for i in range(scheme.stages):
        xi = x
        for j, a in enumerate(scheme.A[i]):
            if a != 0:
                xi = xi + h * a * stages[j]
        stages.append(np.asarray(rhs(xi), dtype=np.float64))
    return x + h * sum(bj * k for bj, k in zip(scheme.b, stages))
