import numpy as np
import pytest

from lib.autodiff import Tape, Tensor, grad
from lib.dynamics import system_rhs, training_trajectory


def finite_difference(f, x, eps=1e-6):
    """Central-difference gradient of a scalar function of one array."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        g[idx] = (f(xp) - f(xm)) / (2 * eps)
    return g


def taped(loss_fn, arrays):
    """(loss value, gradients) of loss_fn(*leaves) from one reverse sweep."""
    with Tape() as tape:
        leaves = [tape.variable(a) for a in arrays]
        loss = loss_fn(*leaves)
    return loss.item(), [g.numpy() for g in grad(loss, leaves)]


def relative_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def check_gradients(loss_fn, arrays, tol=1e-4, eps=1e-6):
    """Compare every taped gradient with central differences."""
    _, grads = taped(loss_fn, arrays)
    for k, g in enumerate(grads):
        def f(x, k=k):
            args = [Tensor(a) for a in arrays]
            args[k] = Tensor(x)
            return loss_fn(*args).item()
        fd = finite_difference(f, arrays[k], eps)
        assert relative_error(g, fd) <= tol, f"argument {k}: {relative_error(g, fd):.2e}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def lorenz_short():
    """Clean Lorenz latent trajectory, 2001 samples on [0, 4]."""
    return training_trajectory(system_rhs("lorenz"), n_samples=2001, t_end=4.0)
