# ─────────────────────────────────────────────────────────────────────────────
# Evaluation: model simulation, relative-error metrics, affine latent
# alignment, coefficient re-expansion, least-squares oracle, noise recovery
# ─────────────────────────────────────────────────────────────────────────────
#
# Relative errors are Frobenius norms over the whole test matrix:
#   ‖A − B‖_F / ‖A‖_F

import itertools
import logging
from dataclasses import dataclass

import numpy as np
import sympy as sp

from lib.autoencoder import forward_network
from lib.config import BLOWUP_BOUND
from lib.dynamics import TimeSeries, integrate_rk4
from lib.errors import ContractError, DimensionError, DomainError, RankDeficientError
from lib.sindy import SindyCoefficients, build_library, library_terms

logger = logging.getLogger(__name__)


# ─────────────────────────────────────────────────────────────────────────────
# Simulation
# ─────────────────────────────────────────────────────────────────────────────

def sindy_rhs(coeffs, spec):
    """Vector field z ↦ Θ(z)·(mask∘Φ) of a first-order model."""
    Xi = coeffs.masked
    return lambda z: (build_library(np.atleast_2d(z), spec) @ Xi)[0]


def sindy_simulate(z0, t, coeffs, spec, dz0=None):
    """
    Integrate the discovered model from z0 on the grid t with RK4.

    Second-order models integrate the first-order system on [z, dz] and
    need dz0; the returned series then holds z with dz alongside.
    """
    z0 = np.asarray(z0, dtype=np.float64).reshape(-1)
    if z0.size != spec.latent_dim:
        raise DimensionError(f"z0 has {z0.size} entries for latent_dim {spec.latent_dim}")
    if spec.model_order == 1:
        return integrate_rk4(sindy_rhs(coeffs, spec), z0, t, bound=BLOWUP_BOUND)

    if dz0 is None:
        raise ContractError("second-order simulation needs dz0")
    n = spec.latent_dim
    Xi = coeffs.masked

    def rhs(state):
        z, dz = state[:n], state[n:]
        ddz = (build_library(z[None, :], spec, dz[None, :]) @ Xi)[0]
        return np.concatenate([dz, ddz])

    state0 = np.concatenate([z0, np.asarray(dz0, dtype=np.float64).reshape(-1)])
    full = integrate_rk4(rhs, state0, t, bound=BLOWUP_BOUND)
    return TimeSeries(full.t, full.x[:, :n], full.x[:, n:], full.dx[:, n:])


def trajectory_relative_error(reference, simulated):
    """Pointwise ‖z_ref(t) − z_sim(t)‖ / ‖z_ref(t)‖ over the common samples."""
    k = min(reference.n_samples, simulated.n_samples)
    num = np.linalg.norm(reference.x[:k] - simulated.x[:k], axis=1)
    den = np.linalg.norm(reference.x[:k], axis=1)
    if np.any(den == 0):
        raise DomainError("reference trajectory passes through the origin")
    return num / den


# ─────────────────────────────────────────────────────────────────────────────
# Metrics
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Metrics:
    decoder_relative_error: float
    decoder_sindy_relative_error: float
    latent_sindy_relative_error: float

    def as_dict(self):
        return {
            "decoder_relative_error": self.decoder_relative_error,
            "decoder_sindy_relative_error": self.decoder_sindy_relative_error,
            "latent_sindy_relative_error": self.latent_sindy_relative_error,
        }


def relative_error(reference, estimate):
    reference, estimate = np.asarray(reference), np.asarray(estimate)
    denom = np.linalg.norm(reference)
    if denom == 0:
        raise DomainError("relative error against an all-zero reference")
    return float(np.linalg.norm(reference - estimate) / denom)


def compute_metrics(model, data):
    """The three relative errors of a trained model on a (denoised) test series."""
    if data.dx is None:
        raise DomainError("evaluation data needs dx")
    if data.dim != model.autoencoder.input_dim:
        raise DimensionError(f"data has {data.dim} columns, model expects {model.autoencoder.input_dim}")
    ddx = data.ddx if model.spec.model_order == 2 else None
    if model.spec.model_order == 2 and ddx is None:
        raise DomainError("second-order evaluation needs ddx")

    s = forward_network(data.x, data.dx, model.autoencoder, model.coefficients, model.spec, ddx=ddx)
    if model.spec.model_order == 1:
        x_target, x_pred, z_target = s.dx, s.dx_decode, s.dz
    else:
        x_target, x_pred, z_target = s.ddx, s.ddx_decode, s.ddz
    return Metrics(
        decoder_relative_error=relative_error(s.x.data, s.x_decode.data),
        decoder_sindy_relative_error=relative_error(x_target.data, x_pred.data),
        latent_sindy_relative_error=relative_error(z_target.data, s.sindy_predict.data),
    )


# ─────────────────────────────────────────────────────────────────────────────
# Affine latent alignment
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class AffineLatentTransform:
    """z_i = scale_i · z̃_{permutation_i} + offset_i."""

    scale: np.ndarray
    offset: np.ndarray
    permutation: tuple
    residual: float = 0.0

    def __post_init__(self):
        scale = np.asarray(self.scale, dtype=np.float64).reshape(-1)
        offset = np.asarray(self.offset, dtype=np.float64).reshape(-1)
        perm = tuple(int(p) for p in self.permutation)
        if scale.size != offset.size or sorted(perm) != list(range(scale.size)):
            raise DimensionError("scale, offset and permutation must describe the same coordinates")
        if np.any(scale == 0):
            raise DomainError("affine scale entries must be nonzero")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "permutation", perm)

    @classmethod
    def identity(cls, n):
        return cls(np.ones(n), np.zeros(n), tuple(range(n)))

    def apply(self, z_reference):
        """Map reference coordinates z̃ to learned coordinates z."""
        return z_reference[:, list(self.permutation)] * self.scale + self.offset

    def inverse(self):
        n = self.scale.size
        inv_perm = [0] * n
        for i, p in enumerate(self.permutation):
            inv_perm[p] = i
        scale = np.array([1.0 / self.scale[inv_perm[j]] for j in range(n)])
        offset = np.array([-self.offset[inv_perm[j]] / self.scale[inv_perm[j]] for j in range(n)])
        return AffineLatentTransform(scale, offset, tuple(inv_perm), self.residual)

    def to_dict(self):
        return {
            "scale": self.scale.tolist(), "offset": self.offset.tolist(),
            "permutation": list(self.permutation), "residual": self.residual,
        }


def fit_affine_latent_transform(z_learned, z_reference):
    """
    Least-squares z_i ≈ α_i z̃_π(i) + β_i over every coordinate matching π.

    The sign of α comes out of each fit; the matching with the smallest total
    residual wins.
    """
    Z = z_learned.x if isinstance(z_learned, TimeSeries) else np.atleast_2d(z_learned)
    R = z_reference.x if isinstance(z_reference, TimeSeries) else np.atleast_2d(z_reference)
    if Z.shape != R.shape:
        raise DimensionError(f"learned {Z.shape} and reference {R.shape} latent series differ")
    if np.any(np.ptp(Z, axis=0) == 0) or np.any(np.ptp(R, axis=0) == 0):
        raise DomainError("cannot fit an affine map to a constant coordinate")

    n = Z.shape[1]
    # fits[i][j] = (alpha, beta, sse) for z_i against z̃_j
    fits = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            A = np.column_stack([R[:, j], np.ones(len(R))])
            (alpha, beta), *_ = np.linalg.lstsq(A, Z[:, i], rcond=None)
            fits[i][j] = (alpha, beta, float(np.sum((A @ (alpha, beta) - Z[:, i]) ** 2)))

    best = min(itertools.permutations(range(n)), key=lambda p: sum(fits[i][p[i]][2] for i in range(n)))
    scale = np.array([fits[i][best[i]][0] for i in range(n)])
    offset = np.array([fits[i][best[i]][1] for i in range(n)])
    residual = float(np.sqrt(sum(fits[i][best[i]][2] for i in range(n))) / np.linalg.norm(Z))
    logger.debug("affine fit: permutation %s, residual %.3e", best, residual)
    return AffineLatentTransform(scale, offset, best, residual)


# ─────────────────────────────────────────────────────────────────────────────
# Coefficient re-expansion under an affine change of variables
# ─────────────────────────────────────────────────────────────────────────────

def _exponents(term, n):
    counts = [0] * n
    for i in term[1]:
        counts[i] += 1
    return tuple(counts)


def transform_coefficients(coeffs, T, spec, tol=1e-12):
    """
    Rewrite ż = Θ(z)Φ in the reference coordinates z̃ of T
    (z = diag(α) z̃_π + β) and re-expand onto the same library.
    """
    if spec.model_order != 1:
        raise ContractError("coefficient re-expansion supports first-order models only")
    if spec.poly_order > 3:
        raise DomainError(f"coefficient re-expansion supports poly_order <= 3, got {spec.poly_order}")
    n = spec.latent_dim
    if T.scale.size != n:
        raise DimensionError(f"transform over {T.scale.size} coordinates for latent_dim {n}")

    terms = library_terms(n, spec.poly_order, spec.include_sine, spec.include_constant)
    column = {_exponents(t, n): k for k, t in enumerate(terms) if t[0] != "sin"}
    sine_column = {t[1][0]: k for k, t in enumerate(terms) if t[0] == "sin"}

    zt = sp.symbols(f"zt1:{n + 1}")
    z = [sp.Float(T.scale[i]) * zt[T.permutation[i]] + sp.Float(T.offset[i]) for i in range(n)]
    Xi = coeffs.masked
    scale_of = np.max(np.abs(Xi)) if Xi.size and np.any(Xi) else 1.0

    out = np.zeros_like(Xi)
    overflow = []
    for i in range(n):
        target = T.permutation[i]
        poly_part = sp.Integer(0)
        for k, term in enumerate(terms):
            c = Xi[k, i]
            if c == 0:
                continue
            kind, idx = term
            if kind == "sin":
                j = idx[0]
                if T.offset[j] == 0 and abs(T.scale[j]) == 1:
                    out[sine_column[T.permutation[j]], target] += c * T.scale[j] / T.scale[i]
                else:
                    overflow.append(f"sin({z[j]}) in equation {i + 1}")
                continue
            poly_part += sp.Float(c) * sp.Mul(*[z[v] for v in idx])

        if poly_part == 0:
            continue
        poly = sp.Poly(sp.expand(poly_part / sp.Float(T.scale[i])), *zt)
        for monom, value in poly.terms():
            value = float(value)
            if monom in column:
                out[column[monom], target] += value
            elif abs(value) > tol * scale_of:
                overflow.append(f"{sp.Mul(*[v ** e for v, e in zip(zt, monom)])} in equation {i + 1}")

    if overflow:
        raise DomainError("transformed model leaves the library: " + ", ".join(overflow))
    mask = np.abs(out) > tol * scale_of
    return SindyCoefficients(np.where(mask, out, 0.0), mask)


# ─────────────────────────────────────────────────────────────────────────────
# Least-squares oracle
# ─────────────────────────────────────────────────────────────────────────────

def least_squares_sindy(Z, dZ, spec, threshold=None, max_iter=20, ddZ=None):
    """
    Solve Θ(Z)Φ ≈ dZ by least squares; with a threshold, repeat
    zero-small-entries-and-refit on the active set until the mask stops changing.

    Second-order specs regress ddZ on Θ([Z, dZ]).
    """
    Z, dZ = np.atleast_2d(Z), np.atleast_2d(dZ)
    if spec.model_order == 1:
        theta, target = build_library(Z, spec), dZ
    else:
        if ddZ is None:
            raise ContractError("second-order regression needs ddZ")
        theta, target = build_library(Z, spec, dZ), np.atleast_2d(ddZ)
    m, p = theta.shape
    if target.shape != (m, spec.latent_dim):
        raise DimensionError(f"target {target.shape} does not match {m} samples × {spec.latent_dim}")
    if m < p:
        raise DomainError(f"{m} samples cannot determine {p} library columns")
    rank = np.linalg.matrix_rank(theta)
    if rank < p:
        raise RankDeficientError(rank, p)

    Xi = np.linalg.lstsq(theta, target, rcond=None)[0]
    mask = np.ones_like(Xi, dtype=bool)
    if threshold is not None:
        for _ in range(max_iter):
            new_mask = mask & (np.abs(Xi) >= threshold)
            Xi = np.where(new_mask, Xi, 0.0)
            for j in range(Xi.shape[1]):
                active = new_mask[:, j]
                if active.any():
                    Xi[active, j] = np.linalg.lstsq(theta[:, active], target[:, j], rcond=None)[0]
            if np.array_equal(new_mask, mask):
                break
            mask = new_mask
    return SindyCoefficients(Xi, mask)


# ─────────────────────────────────────────────────────────────────────────────
# Noise recovery
# ─────────────────────────────────────────────────────────────────────────────

def _correlation(a, b):
    a, b = a.reshape(-1), b.reshape(-1)
    if np.std(a) == 0 or np.std(b) == 0:
        raise DomainError("correlation of a zero-variance signal is undefined")
    return float(np.corrcoef(a, b)[0, 1])


def noise_recovery_report(n_est, n_true, num_dt=0):
    """
    Compare an estimated noise matrix (NoiseEstimate, d × m) with the injected
    noise over the interior columns [num_dt, m − num_dt).
    """
    N_est = n_est.N
    N_true = np.atleast_2d(np.asarray(n_true, dtype=np.float64))
    if N_est.shape != N_true.shape:
        raise DimensionError(f"estimated noise {N_est.shape} and true noise {N_true.shape} differ")
    m = N_est.shape[1]
    if m <= 2 * num_dt:
        raise DomainError(f"no interior columns for num_dt={num_dt}")
    est, true = N_est[:, num_dt: m - num_dt], N_true[:, num_dt: m - num_dt]
    true_norm = np.linalg.norm(true)
    if true_norm == 0 or np.std(true) == 0:
        raise DomainError("true noise has zero variance")

    per_coordinate = []
    for k in range(est.shape[0]):
        row_norm = np.linalg.norm(true[k])
        per_coordinate.append({
            "coordinate": k + 1,
            "correlation": _correlation(est[k], true[k]) if np.std(est[k]) * np.std(true[k]) > 0 else 0.0,
            "relative_l2": float(np.linalg.norm(est[k] - true[k]) / row_norm) if row_norm else float("nan"),
            "std_estimated": float(np.std(est[k])),
            "std_true": float(np.std(true[k])),
        })

    corr = _correlation(est, true) if np.std(est) > 0 else 0.0
    return {
        "correlation": corr,
        "relative_l2": float(np.linalg.norm(est - true) / true_norm),
        "interior_columns": int(est.shape[1]),
        "per_coordinate": per_coordinate,
    }


def denoising_gain(clean, observed, denoised):
    """RMSE to the clean signal before and after denoising."""
    before = float(np.sqrt(np.mean((observed - clean) ** 2)))
    after = float(np.sqrt(np.mean((denoised - clean) ** 2)))
    return {"rmse_observed": before, "rmse_denoised": after,
            "reduction": 1.0 - after / before if before else 0.0}
