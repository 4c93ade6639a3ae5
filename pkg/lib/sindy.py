# ─────────────────────────────────────────────────────────────────────────────
# SINDy candidate library Θ, coefficient mask and sequential thresholding
# ─────────────────────────────────────────────────────────────────────────────
#
# Column order (frozen, matches the row indices of the Lorenz ground truth):
#   constant; z1..zn; degree-2 monomials zi*zj with i <= j in lexicographic
#   order; degree 3 likewise (i <= j <= k); ...; then sin(z1)..sin(zn).
# Order-2 libraries use the same order over the variables [z1..zn, dz1..dzn].

from dataclasses import dataclass, replace
from functools import lru_cache
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np
import pandas as pd

from lib.autodiff import Tensor, constant, elementwise, gather_columns, hstack, matmul, mul_const
from lib.config import FLOAT_FORMAT
from lib.dynamics import library_size
from lib.errors import ContractError, DatasetError, DimensionError, DomainError


@dataclass(frozen=True)
class SindySpec:
    latent_dim: int
    poly_order: int = 3
    include_sine: bool = False
    include_constant: bool = True
    model_order: int = 1

    def __post_init__(self):
        if self.model_order not in (1, 2):
            raise DomainError(f"model_order must be 1 or 2, got {self.model_order}")
        # validates latent_dim and poly_order
        library_size(self.effective_dim, self.poly_order, self.include_sine, self.include_constant)

    @property
    def effective_dim(self):
        return self.latent_dim * self.model_order

    @property
    def library_dim(self):
        return library_size(self.effective_dim, self.poly_order, self.include_sine, self.include_constant)

    def to_dict(self):
        return dict(
            latent_dim=self.latent_dim, poly_order=self.poly_order,
            include_sine=self.include_sine, include_constant=self.include_constant,
            model_order=self.model_order,
        )


@dataclass(frozen=True, eq=False)
class SindyCoefficients:
    """
    Φ (library_dim × latent_dim) and its boolean mask.

    Masked-out entries count as exactly zero in every prediction. `phi` may
    be a Tensor while a training tape is being recorded.
    """

    phi: object
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != tuple(self.phi.shape):
            raise DimensionError(f"mask {mask.shape} does not match phi {self.phi.shape}")
        object.__setattr__(self, "mask", mask)

    @property
    def values(self):
        """Numeric Φ as a plain array."""
        return np.array(self.phi.data if isinstance(self.phi, Tensor) else self.phi, dtype=np.float64)

    @property
    def masked(self):
        return self.values * self.mask

    @property
    def active_count(self):
        return int(self.mask.sum())


# ─────────────────────────────────────────────────────────────────────────────
# Term enumeration
# ─────────────────────────────────────────────────────────────────────────────

@lru_cache(maxsize=None)
def library_terms(n, poly_order, include_sine=False, include_constant=True):
    """Ordered terms: ("const", ()), ("poly", (i, j, ...)), ("sin", (i,))."""
    library_size(n, poly_order, include_sine, include_constant)
    terms = [("const", ())] if include_constant else []
    for k in range(1, poly_order + 1):
        terms += [("poly", combo) for combo in combinations_with_replacement(range(n), k)]
    if include_sine:
        terms += [("sin", (i,)) for i in range(n)]
    return tuple(terms)


def variable_names(spec):
    z = [f"z{i + 1}" for i in range(spec.latent_dim)]
    if spec.model_order == 2:
        z += [f"dz{i + 1}" for i in range(spec.latent_dim)]
    return z


def term_name(term, names):
    kind, idx = term
    if kind == "const":
        return "1"
    if kind == "sin":
        return f"sin({names[idx[0]]})"
    return "*".join(names[i] for i in idx)


def library_names(spec):
    names = variable_names(spec)
    terms = library_terms(spec.effective_dim, spec.poly_order, spec.include_sine, spec.include_constant)
    return [term_name(term, names) for term in terms]


def equation_names(spec):
    prefix = "dd" if spec.model_order == 2 else "d"
    return [f"{prefix}z{i + 1}" for i in range(spec.latent_dim)]


# ─────────────────────────────────────────────────────────────────────────────
# Library construction
# ─────────────────────────────────────────────────────────────────────────────

def _build(Z, spec):
    n = spec.effective_dim
    blocks = []
    if spec.include_constant:
        blocks.append(constant(np.ones((Z.shape[0], 1))))
    for k in range(1, spec.poly_order + 1):
        combos = list(combinations_with_replacement(range(n), k))
        block = gather_columns(Z, [c[0] for c in combos])
        for pos in range(1, k):
            block = elementwise("mul", block, gather_columns(Z, [c[pos] for c in combos]))
        blocks.append(block)
    if spec.include_sine:
        blocks.append(elementwise("sin", Z))
    return hstack(blocks)


def _unwrap(result, like):
    return result if isinstance(like, Tensor) else result.numpy()


def build_library_order1(Z, spec):
    """Θ(Z) for first-order models. Accepts arrays or Tensors, returns the same kind."""
    if spec.model_order != 1:
        raise ContractError("build_library_order1 needs a first-order spec")
    Zt = Z if isinstance(Z, Tensor) else Tensor(np.atleast_2d(Z))
    if Zt.shape[1] != spec.latent_dim:
        raise DimensionError(f"{Zt.shape[1]} latent columns for latent_dim {spec.latent_dim}")
    return _unwrap(_build(Zt, spec), Z)


def build_library_order2(Z, dZ, spec):
    """Θ([Z, dZ]) for second-order models."""
    if spec.model_order != 2:
        raise ContractError("build_library_order2 needs a second-order spec")
    Zt = Z if isinstance(Z, Tensor) else Tensor(np.atleast_2d(Z))
    dZt = dZ if isinstance(dZ, Tensor) else Tensor(np.atleast_2d(dZ))
    if Zt.shape != dZt.shape:
        raise DimensionError(f"Z {Zt.shape} and dZ {dZt.shape} differ")
    if Zt.shape[1] != spec.latent_dim:
        raise DimensionError(f"{Zt.shape[1]} latent columns for latent_dim {spec.latent_dim}")
    return _unwrap(_build(hstack([Zt, dZt]), spec), Z)


def build_library(Z, spec, dZ=None):
    if spec.model_order == 1:
        return build_library_order1(Z, spec)
    if dZ is None:
        raise ContractError("second-order library needs dZ")
    return build_library_order2(Z, dZ, spec)


def sindy_predict(theta, coeffs):
    """Θ · (mask ∘ Φ)."""
    tt = theta if isinstance(theta, Tensor) else Tensor(theta)
    phi = coeffs.phi if isinstance(coeffs.phi, Tensor) else Tensor(coeffs.phi)
    if tt.shape[1] != phi.shape[0]:
        raise DimensionError(f"theta has {tt.shape[1]} columns, phi has {phi.shape[0]} rows")
    out = matmul(tt, mul_const(phi, coeffs.mask.astype(np.float64)))
    return out if isinstance(theta, Tensor) else out.numpy()


# ─────────────────────────────────────────────────────────────────────────────
# Coefficients: initialization and thresholding
# ─────────────────────────────────────────────────────────────────────────────

COEFFICIENT_INITIALIZATIONS = ("constant", "xavier", "normal", "specified")


def init_coefficients(spec, method="constant", rng=None, specified=None):
    shape = (spec.library_dim, spec.latent_dim)
    rng = rng if rng is not None else np.random.default_rng(0)
    if method == "constant":
        phi = np.ones(shape)
    elif method == "xavier":
        limit = np.sqrt(6.0 / sum(shape))
        phi = rng.uniform(-limit, limit, size=shape)
    elif method == "normal":
        phi = rng.standard_normal(shape)
    elif method == "specified":
        if specified is None:
            raise ContractError("specified initialization needs init_coefficients")
        phi = np.array(specified, dtype=np.float64)
        if phi.shape != shape:
            raise DimensionError(f"init_coefficients shape {phi.shape} != {shape}")
    else:
        raise DomainError(f"unknown coefficient initialization {method!r}")
    return SindyCoefficients(phi, np.ones(shape, dtype=bool))


def apply_threshold(coeffs, threshold):
    """Clear mask entries with |phi| < threshold; cleared entries stay cleared."""
    if threshold < 0:
        raise DomainError(f"threshold must be non-negative, got {threshold}")
    keep = np.abs(coeffs.values) >= threshold
    return replace(coeffs, mask=coeffs.mask & keep)


# ─────────────────────────────────────────────────────────────────────────────
# CSV round trip: one row per equation, one column per library term
# ─────────────────────────────────────────────────────────────────────────────

def coefficients_frame(matrix, spec):
    return pd.DataFrame(
        np.asarray(matrix).T,
        index=pd.Index(equation_names(spec), name="equation"),
        columns=library_names(spec),
    )


def save_coefficients(coeffs, spec, directory, stem="phi"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    coefficients_frame(coeffs.values, spec).to_csv(directory / f"{stem}.csv", float_format=FLOAT_FORMAT)
    coefficients_frame(coeffs.mask.astype(int), spec).to_csv(directory / f"{stem}_mask.csv")


def _read_frame(path, spec):
    if not path.exists():
        raise DatasetError(f"missing coefficient file {path}")
    frame = pd.read_csv(path, index_col="equation", float_precision="round_trip")
    if list(frame.columns) != library_names(spec) or list(frame.index) != equation_names(spec):
        raise DatasetError(f"{path}: header does not match the library of {spec}")
    return frame.to_numpy().T


def load_coefficients(spec, directory, stem="phi"):
    directory = Path(directory)
    phi = _read_frame(directory / f"{stem}.csv", spec).astype(np.float64)
    mask = _read_frame(directory / f"{stem}_mask.csv", spec).astype(bool)
    return SindyCoefficients(phi, mask)
