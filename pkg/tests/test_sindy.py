import numpy as np
import pytest

from conftest import check_gradients
from lib.autodiff import Tensor, mean_square
from lib.errors import ContractError, DatasetError, DimensionError, DomainError
from lib.sindy import (
    SindyCoefficients, SindySpec, apply_threshold, build_library, build_library_order1,
    build_library_order2, equation_names, init_coefficients, library_names, library_terms,
    load_coefficients, save_coefficients, sindy_predict,
)


def test_two_variable_quadratic_library():
    spec = SindySpec(latent_dim=2, poly_order=2)
    theta = build_library_order1(np.array([[2.0, 3.0]]), spec)
    assert np.array_equal(theta, [[1.0, 2.0, 3.0, 4.0, 6.0, 9.0]])
    assert library_names(spec) == ["1", "z1", "z2", "z1*z1", "z1*z2", "z2*z2"]


def test_lorenz_library_layout():
    spec = SindySpec(latent_dim=3)
    assert spec.library_dim == 20
    names = library_names(spec)
    assert names[:4] == ["1", "z1", "z2", "z3"]
    assert names[5] == "z1*z2" and names[6] == "z1*z3"
    assert names[-1] == "z3*z3*z3"


def test_sine_terms_come_last():
    spec = SindySpec(latent_dim=2, poly_order=1, include_sine=True)
    theta = build_library_order1(np.array([[0.5, -1.0]]), spec)
    assert library_names(spec)[-2:] == ["sin(z1)", "sin(z2)"]
    assert np.allclose(theta[0, -2:], np.sin([0.5, -1.0]))


def test_order_two_library_uses_derivatives():
    spec = SindySpec(latent_dim=3, model_order=2)
    assert spec.library_dim == 84
    Z, dZ = np.ones((4, 3)), 2 * np.ones((4, 3))
    theta = build_library_order2(Z, dZ, spec)
    assert theta.shape == (4, 84)
    assert library_names(spec)[4:7] == ["dz1", "dz2", "dz3"]
    assert equation_names(spec) == ["ddz1", "ddz2", "ddz3"]
    assert np.array_equal(theta[:, 4], [2.0] * 4)


def test_library_order_contract():
    first, second = SindySpec(latent_dim=2), SindySpec(latent_dim=2, model_order=2)
    with pytest.raises(ContractError):
        build_library_order1(np.ones((1, 2)), second)
    with pytest.raises(ContractError):
        build_library_order2(np.ones((1, 2)), np.ones((1, 2)), first)
    with pytest.raises(ContractError):
        build_library(np.ones((1, 2)), second)
    with pytest.raises(DimensionError):
        build_library_order1(np.ones((1, 3)), first)


def test_spec_domain():
    with pytest.raises(DomainError):
        SindySpec(latent_dim=3, poly_order=6)
    with pytest.raises(DomainError):
        SindySpec(latent_dim=3, model_order=3)
    assert library_terms(2, 1, False, False) == (("poly", (0,)), ("poly", (1,)))


def test_library_gradient(rng):
    spec = SindySpec(latent_dim=2, poly_order=3, include_sine=True)
    Z = rng.uniform(-1, 1, (5, 2))
    weights = rng.uniform(-1, 1, (5, spec.library_dim))
    check_gradients(lambda z: mean_square(build_library_order1(z, spec) * Tensor(weights)), [Z], tol=1e-5)


def test_masked_entries_do_not_contribute(rng):
    spec = SindySpec(latent_dim=2, poly_order=2)
    theta = build_library(rng.uniform(-1, 1, (6, 2)), spec)
    phi = rng.uniform(-1, 1, (6, 2))
    mask = np.ones((6, 2), dtype=bool)
    mask[3, 0] = False
    predicted = sindy_predict(theta, SindyCoefficients(phi, mask))
    assert np.allclose(predicted, theta @ (phi * mask))

    bumped = phi.copy()
    bumped[3, 0] = 1e3
    assert np.array_equal(sindy_predict(theta, SindyCoefficients(bumped, mask)), predicted)


def test_masked_entries_get_zero_gradient(rng):
    from conftest import taped
    spec = SindySpec(latent_dim=2, poly_order=1)
    theta = build_library(rng.uniform(-1, 1, (6, 2)), spec)
    mask = np.array([[True, False], [False, True], [True, True]])
    _, (g,) = taped(lambda p: mean_square(sindy_predict(Tensor(theta), SindyCoefficients(p, mask))),
                    [rng.uniform(-1, 1, (3, 2))])
    assert np.all(g[~mask] == 0)
    assert np.all(g[mask] != 0)


def test_threshold_is_monotone():
    coeffs = SindyCoefficients(np.array([[0.05, 1.0], [-0.2, 0.01]]), np.ones((2, 2), dtype=bool))
    once = apply_threshold(coeffs, 0.1)
    assert once.mask.tolist() == [[False, True], [True, False]]
    regrown = SindyCoefficients(np.array([[5.0, 1.0], [-0.2, 5.0]]), once.mask)
    assert np.array_equal(apply_threshold(regrown, 0.1).mask, once.mask)
    assert apply_threshold(coeffs, 0.0).active_count == 4
    with pytest.raises(DomainError):
        apply_threshold(coeffs, -1.0)


def test_threshold_keeps_entries_at_the_boundary():
    coeffs = SindyCoefficients(np.array([[0.1, -0.1]]), np.ones((1, 2), dtype=bool))
    assert apply_threshold(coeffs, 0.1).active_count == 2


def test_coefficient_initializations(rng):
    spec = SindySpec(latent_dim=2, poly_order=2)
    assert np.array_equal(init_coefficients(spec).values, np.ones((6, 2)))
    assert init_coefficients(spec, "xavier", rng).values.shape == (6, 2)
    given = np.arange(12.0).reshape(6, 2)
    assert np.array_equal(init_coefficients(spec, "specified", specified=given).values, given)
    with pytest.raises(DimensionError):
        init_coefficients(spec, "specified", specified=np.ones((2, 2)))
    with pytest.raises(DomainError):
        init_coefficients(spec, "zeros")


def test_coefficient_csv(tmp_path, rng):
    spec = SindySpec(latent_dim=3)
    coeffs = apply_threshold(init_coefficients(spec, "normal", rng), 0.5)
    save_coefficients(coeffs, spec, tmp_path)
    loaded = load_coefficients(spec, tmp_path)
    assert np.array_equal(loaded.values, coeffs.values)
    assert np.array_equal(loaded.mask, coeffs.mask)
    with pytest.raises(DatasetError):
        load_coefficients(SindySpec(latent_dim=3, poly_order=2), tmp_path)
    with pytest.raises(DatasetError):
        load_coefficients(spec, tmp_path / "missing")
