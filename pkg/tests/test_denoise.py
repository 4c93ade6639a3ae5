import numpy as np
import pytest

from conftest import check_gradients
from lib.autodiff import Tensor
from lib.denoise import (
    DenoiseConfig, NoiseEstimate, denoise_objective, init_noise_estimate, save_denoise_result,
    separate_noise,
)
from lib.dynamics import TimeSeries, add_noise, lorenz_rhs, training_trajectory
from lib.errors import DimensionError, DomainError, NumericError
from lib.evaluation import denoising_gain, noise_recovery_report
from lib.network import MlpParams, init_mlp


def decay_series(m=60, t_end=1.0):
    t = np.linspace(0.0, t_end, m)
    x = np.exp(-t)[:, None] * np.array([1.0, -0.5])
    return TimeSeries(t, x, -x)


def test_prediction_weights():
    assert np.allclose(DenoiseConfig(num_dt=3).prediction_weights(), [1.0, 0.9, 0.81])
    assert np.allclose(DenoiseConfig(num_dt=3, weight_decay="linear").prediction_weights(), [1.0, 0.5, 1 / 3])


@pytest.mark.parametrize("kwargs", [
    dict(num_dt=0), dict(gamma=-1.0), dict(decay_const=0.0), dict(decay_const=1.5),
    dict(weight_decay="poly"), dict(optimizer="sgd"),
])
def test_config_domain(kwargs):
    with pytest.raises(DomainError):
        DenoiseConfig(**kwargs)


def test_noise_estimate_must_be_finite():
    with pytest.raises(NumericError):
        NoiseEstimate(np.array([[0.0, np.inf]]))


def test_initial_estimate_of_constant_and_ramp():
    assert np.array_equal(init_noise_estimate(np.full((2, 20), 3.0)).N, np.zeros((2, 20)))
    ramp = np.linspace(0, 1, 30)[None, :] * np.array([[1.0], [-2.0]])
    assert np.abs(init_noise_estimate(ramp, 7).N[:, 3:-3]).max() <= 1e-12


def test_initial_estimate_recovers_noise_scale(rng):
    t = np.linspace(0, 10, 4000)
    Y = np.sin(t)[None, :] + rng.normal(0, 0.1, (1, t.size))
    ratio = init_noise_estimate(Y, 7).N.std() / 0.1
    assert 0.7 <= ratio <= 1.1


def test_initial_estimate_window_checks():
    with pytest.raises(DomainError):
        init_noise_estimate(np.zeros((1, 20)), 4)
    with pytest.raises(DomainError):
        init_noise_estimate(np.zeros((1, 5)), 7)


def test_exact_field_has_only_truncation_error():
    t = np.arange(0, 1.0, 0.01)
    Y = np.exp(-t)[:, None]
    exact = MlpParams((np.array([[-1.0]]),), (np.zeros(1),), "elu")
    cfg = DenoiseConfig(num_dt=5, gamma=0.0, beta_reg=0.0)
    loss = denoise_objective(Y, t, np.diff(t), exact, np.zeros_like(Y), cfg)
    assert loss.item() < 1e-8


def test_objective_needs_enough_samples():
    t = np.linspace(0, 1, 6)
    net = init_mlp([1, 1])
    with pytest.raises(DomainError):
        denoise_objective(np.ones((6, 1)), t, np.diff(t), net, np.zeros((6, 1)), DenoiseConfig(num_dt=3))
    with pytest.raises(DimensionError):
        denoise_objective(np.ones((6, 1)), t, np.diff(t), net, np.zeros((5, 1)), DenoiseConfig(num_dt=2))


def test_objective_gradients(rng):
    series = decay_series(m=20, t_end=0.5)
    Y = series.x + rng.normal(0, 0.01, series.x.shape)
    H = np.diff(series.t)
    cfg = DenoiseConfig(num_dt=3, gamma=1e-2, beta_reg=1e-2)
    net = init_mlp([2, 4, 2], "tanh", rng)
    N = rng.normal(0, 0.01, Y.shape)

    def loss(W0, b0, W1, b1, noise):
        return denoise_objective(Y, series.t, H, MlpParams((W0, W1), (b0, b1), "tanh"), noise, cfg)

    arrays = [p + rng.uniform(-0.1, 0.1, p.shape) for p in net.parameters()] + [N]
    check_gradients(loss, arrays, tol=1e-4)


def test_objective_ignores_hidden_unit_order(rng):
    series = decay_series(m=30)
    cfg = DenoiseConfig(num_dt=4, gamma=1e-3, beta_reg=1e-3)
    net = init_mlp([2, 6, 2], "elu", rng)
    W0, b0, W1, b1 = net.parameters()
    b0 = rng.uniform(-0.5, 0.5, b0.shape)
    perm = rng.permutation(6)
    shuffled = MlpParams((W0[:, perm], W1[perm, :]), (b0[perm], b1), "elu")
    original = MlpParams((W0, W1), (b0, b1), "elu")
    N = rng.normal(0, 0.01, series.x.shape)
    H = np.diff(series.t)
    a = denoise_objective(series.x, series.t, H, original, N, cfg).item()
    b = denoise_objective(series.x, series.t, H, shuffled, N, cfg).item()
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_noise_estimate_and_tensor_agree(rng):
    series = decay_series(m=30)
    cfg = DenoiseConfig(num_dt=4)
    net = init_mlp([2, 3, 2], rng=rng)
    N = rng.normal(0, 0.01, series.x.shape)
    H = np.diff(series.t)
    a = denoise_objective(series.x, series.t, H, net, NoiseEstimate(N.T), cfg).item()
    b = denoise_objective(series.x, series.t, H, net, Tensor(N), cfg).item()
    assert a == b


@pytest.fixture(scope="module")
def clean_run():
    cfg = DenoiseConfig(num_dt=3, hidden_layers=1, hidden_width=8, max_iter=60, init_window=3,
                        print_frequency=20)
    return separate_noise(decay_series(), cfg, seed=5)


def test_clean_input_leaves_little_noise(clean_run):
    series = decay_series()
    assert np.linalg.norm(clean_run.noise.N) / np.linalg.norm(series.x) <= 0.01
    assert clean_run.noise.N.shape == (2, 60)
    assert clean_run.denoised.ddx is not None


def test_best_loss_never_increases(clean_run):
    best = clean_run.history["best_loss"].to_numpy()
    assert np.all(np.diff(best) <= 0)
    assert clean_run.history.index.name == "iteration"


def test_separation_is_deterministic(clean_run):
    cfg = DenoiseConfig(num_dt=3, hidden_layers=1, hidden_width=8, max_iter=60, init_window=3,
                        print_frequency=20)
    again = separate_noise(decay_series(), cfg, seed=5)
    assert np.array_equal(again.noise.N, clean_run.noise.N)


def test_adam_fallback():
    cfg = DenoiseConfig(num_dt=3, hidden_layers=1, hidden_width=8, optimizer="adam",
                        max_iter=40, learning_rate=1e-3)
    result = separate_noise(decay_series(), cfg, seed=1)
    losses = result.history["loss"].to_numpy()
    assert len(losses) == 41
    assert np.all(np.diff(losses) <= 0)


def test_too_short_series():
    with pytest.raises(DomainError):
        separate_noise(decay_series(m=7), DenoiseConfig(num_dt=3), seed=0)


def test_saved_artifacts(clean_run, tmp_path):
    save_denoise_result(clean_run, tmp_path)
    for name in ("noise.csv", "loss_history.csv", "denoised/series.csv", "net/W0.csv", "net/b1.csv"):
        assert (tmp_path / name).exists(), name


@pytest.mark.slow
def test_noise_recovery_on_noisy_lorenz():
    clean = training_trajectory(lorenz_rhs, n_samples=3000, t_end=20.0)
    cfg = DenoiseConfig(hidden_layers=2, hidden_width=32, max_iter=300)
    passed = 0
    for seed in range(3):
        data = add_noise(clean, 0.10, seed)
        result = separate_noise(data.observed, cfg, seed=seed)
        report = noise_recovery_report(result.noise, data.true_noise.T, cfg.num_dt)
        gain = denoising_gain(clean.x, data.observed.x, result.denoised.x)
        passed += report["correlation"] >= 0.9 and gain["reduction"] >= 0.5
    assert passed >= 2
