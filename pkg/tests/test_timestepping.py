import numpy as np
import pytest

from conftest import check_gradients
from lib.autodiff import Tensor, elementwise, matmul, mean_square, mul_const
from lib.errors import DimensionError, DomainError
from lib.timestepping import CLASSICAL_RK4, THREE_EIGHTHS, RkScheme, rk_step, rk_timestep


def decay(x):
    return mul_const(x, -1.0)


def taylor4(h):
    return 1 - h + h ** 2 / 2 - h ** 3 / 6 + h ** 4 / 24


@pytest.mark.parametrize("scheme", [THREE_EIGHTHS, CLASSICAL_RK4])
def test_linear_decay_step_matches_fourth_order_taylor(scheme):
    out = rk_timestep(Tensor([[1.0]]), decay, 0.1, scheme=scheme)
    assert out.item() == pytest.approx(taylor4(0.1), abs=1e-14)


def test_backward_direction_negates_the_field():
    out = rk_timestep(Tensor([[1.0]]), decay, 0.1, direction="backward")
    assert out.item() == pytest.approx(taylor4(-0.1), abs=1e-14)


def test_per_row_step_sizes():
    h = np.array([0.1, 0.2, 0.05])
    out = rk_timestep(Tensor(np.ones((3, 1))), decay, h)
    assert np.allclose(out.numpy().ravel(), [taylor4(s) for s in h], atol=1e-14)


def test_global_error_is_fourth_order():
    errors = []
    for h in (0.1, 0.05, 0.025):
        x = np.array([1.0])
        for _ in range(int(round(1.0 / h))):
            x = rk_step(lambda z: -z, x, h, THREE_EIGHTHS)
        errors.append(abs(x[0] - np.exp(-1.0)))
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.7 <= np.log2(coarse / fine) <= 4.3


def test_step_is_differentiable_through_a_network(rng):
    W = rng.uniform(-0.5, 0.5, (3, 3))
    x0 = rng.uniform(-1, 1, (4, 3))
    target = rng.uniform(-1, 1, (4, 3))

    def loss(w):
        step = rk_timestep(Tensor(x0), lambda x: elementwise("tanh", matmul(x, w)), 0.05)
        return mean_square(step - Tensor(target))

    check_gradients(loss, [W], tol=1e-5)


@pytest.mark.parametrize("direction", ["forward", "backward"])
def test_zero_field_leaves_the_state_alone(direction, rng):
    x0 = rng.uniform(-1, 1, (5, 2))
    out = rk_timestep(Tensor(x0), lambda x: mul_const(x, 0.0), 0.1, direction=direction)
    assert np.array_equal(out.numpy(), x0)


def test_forward_then_backward_returns_to_the_start(rng):
    W = Tensor(rng.uniform(-0.5, 0.5, (3, 3)))
    field = lambda x: elementwise("tanh", matmul(x, W))
    x0 = rng.uniform(-1, 1, (4, 3))
    there = rk_timestep(Tensor(x0), field, 0.01)
    back = rk_timestep(there, field, 0.01, direction="backward")
    assert np.allclose(back.numpy(), x0, atol=1e-9)

def test_bad_arguments():
    with pytest.raises(DomainError):
        rk_timestep(Tensor([[1.0]]), decay, 0.1, direction="sideways")
    with pytest.raises(DomainError):
        rk_timestep(Tensor([[1.0]]), decay, 0.0)
    with pytest.raises(DimensionError):
        rk_timestep(Tensor(np.ones((3, 1))), decay, np.array([0.1, 0.1]))


def test_tableau_validation():
    with pytest.raises(DomainError):
        RkScheme(b=(0.5, 0.6), A=((), (1.0,)))
    with pytest.raises(DimensionError):
        RkScheme(b=(0.5, 0.5), A=((), (1.0, 0.0)))
