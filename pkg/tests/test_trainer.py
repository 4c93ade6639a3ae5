import numpy as np
import pytest

from lib.autoencoder import LOSS_NAMES, LossWeights
from lib.dynamics import embed_highdim, integrate_rk4, legendre_modes, linear_decay_rhs, training_trajectory
from lib.errors import DimensionError, DivergenceError, DomainError
from lib.pipeline import embedding_modes
from lib.settings import resolve_config, sindy_spec, train_config
from lib.sindy import SindySpec
from lib.trainer import TrainConfig, train

TOY_SPEC = SindySpec(latent_dim=2, poly_order=1, include_constant=False)


@pytest.fixture(scope="module")
def toy_data():
    latent = integrate_rk4(linear_decay_rhs, [1.0, -0.5], np.linspace(0, 5, 400))
    return embed_highdim(latent, legendre_modes(8, 2, [1.0, 1.0]))


def frozen(**kwargs):
    base = dict(learning_rate=0.0, batch_size=100, widths=(6,), activation="tanh",
                coefficient_initialization="specified",
                specified_coefficients=((-1.0, 0.05), (0.03, -1.0)), print_frequency=1)
    return TrainConfig(**{**base, **kwargs})


def test_single_epoch_with_zero_learning_rate(toy_data):
    cfg = frozen(max_epochs=1, refinement_epochs=0)
    _, coeffs, history = train(toy_data, TOY_SPEC, cfg)
    assert len(history) == 1
    assert np.array_equal(coeffs.values, [[-1.0, 0.05], [0.03, -1.0]])
    assert list(history.columns) == ["phase", *LOSS_NAMES, "active", "wall_clock"]


def test_thresholding_drops_small_coefficients(toy_data):
    cfg = frozen(max_epochs=11, refinement_epochs=0, threshold_frequency=10, threshold=0.1)
    _, coeffs, history = train(toy_data, TOY_SPEC, cfg)
    assert coeffs.mask.tolist() == [[True, False], [False, True]]
    assert history["active"].iloc[0] == 4
    assert history["active"].iloc[-1] == 2


def test_thresholding_can_be_disabled(toy_data):
    cfg = frozen(max_epochs=11, refinement_epochs=0, threshold_frequency=10, sequential_thresholding=False)
    _, coeffs, _ = train(toy_data, TOY_SPEC, cfg)
    assert coeffs.active_count == 4


def test_refinement_phase_is_logged_and_mask_frozen(toy_data):
    cfg = frozen(max_epochs=3, refinement_epochs=2, threshold_frequency=1, threshold=10.0)
    _, coeffs, history = train(toy_data, TOY_SPEC, cfg)
    assert list(history["phase"]) == ["training"] * 3 + ["refinement"] * 2
    assert coeffs.active_count == 0
    # refinement rows optimize total minus the regularizer
    assert np.allclose(history["total"], history["refinement"] + 1e-5 * history["sindy_regularization"])


def test_training_is_deterministic(toy_data):
    cfg = TrainConfig(max_epochs=4, refinement_epochs=1, batch_size=50, widths=(6,), learning_rate=1e-3,
                      coefficient_initialization="xavier", print_frequency=2, seed=3)
    ae_a, c_a, h_a = train(toy_data, TOY_SPEC, cfg)
    ae_b, c_b, h_b = train(toy_data, TOY_SPEC, cfg)
    assert np.array_equal(c_a.values, c_b.values)
    assert all(np.array_equal(p, q) for p, q in zip(ae_a.parameters(), ae_b.parameters()))
    assert h_a.drop(columns="wall_clock").equals(h_b.drop(columns="wall_clock"))


@pytest.mark.slow
def test_loss_decreases_on_the_toy_problem(toy_data):
    cfg = TrainConfig(max_epochs=100, refinement_epochs=0, batch_size=50, widths=(16,), activation="tanh",
                      learning_rate=5e-3, print_frequency=99, threshold_frequency=1000,
                      loss_weights=LossWeights(sindy_x=1e-1, sindy_z=1e-2),
                      coefficient_initialization="xavier")
    _, _, history = train(toy_data, TOY_SPEC, cfg)
    assert history["total"].iloc[-1] < 0.5 * history["total"].iloc[0]


def test_divergence_carries_partial_history(toy_data):
    cfg = frozen(max_epochs=3, refinement_epochs=0, learning_rate=1e200)
    with pytest.raises(DivergenceError) as info:
        train(toy_data, TOY_SPEC, cfg)
    assert list(info.value.partial.columns)[0] == "phase"


def test_preflight_checks(toy_data):
    with pytest.raises(DimensionError):
        train(toy_data, TOY_SPEC, frozen(batch_size=1000))
    with pytest.raises(DimensionError):
        train(toy_data, SindySpec(latent_dim=9, poly_order=1), frozen())
    with pytest.raises(DomainError):
        train(toy_data, SindySpec(latent_dim=2, poly_order=1, model_order=2), frozen())


@pytest.mark.parametrize("kwargs", [
    dict(max_epochs=0, refinement_epochs=0), dict(batch_size=0), dict(threshold_frequency=0),
    dict(threshold=-1.0), dict(coefficient_initialization="ones"),
])
def test_config_domain(kwargs):
    with pytest.raises(DomainError):
        TrainConfig(**kwargs)


@pytest.mark.slow
def test_toy_preset_keeps_one_term_per_equation():
    cfg = resolve_config("toy-linear")
    latent = training_trajectory(linear_decay_rhs, cfg["n_samples"], cfg["t_end"], cfg["train_x0"])
    data = embed_highdim(latent, embedding_modes(cfg))
    _, coeffs, _ = train(data, sindy_spec(cfg), train_config(cfg))
    assert coeffs.mask.sum(axis=0).tolist() == [1, 1]
    # library rows are z1, z2: each equation keeps its own coordinate
    assert coeffs.mask.tolist() == [[True, False], [False, True]]
    assert np.all(np.diag(coeffs.values) < 0)


def test_masked_entries_stay_frozen_through_refinement(toy_data):
    base = dict(learning_rate=1e-3, threshold_frequency=2, threshold=0.1, print_frequency=1)
    _, early, _ = train(toy_data, TOY_SPEC, frozen(max_epochs=3, refinement_epochs=0, **base))
    _, late, history = train(toy_data, TOY_SPEC, frozen(max_epochs=6, refinement_epochs=3, **base))

    dropped = ~early.mask
    assert dropped.sum() == 2
    assert not late.mask[dropped].any()
    assert np.array_equal(late.values[dropped], early.values[dropped])
    assert history["active"].is_monotonic_decreasing
    assert (history.loc[history["phase"] == "refinement", "active"] == late.active_count).all()
