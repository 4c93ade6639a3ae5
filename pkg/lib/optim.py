# ─────────────────────────────────────────────────────────────────────────────
# Optimizers: L-BFGS with a strong-Wolfe line search, and Adam
# ─────────────────────────────────────────────────────────────────────────────

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from lib.errors import DimensionError, DivergenceError, DomainError

logger = logging.getLogger(__name__)


# ─────────────────────────────────────────────────────────────────────────────
# Flat parameter vectors
# ─────────────────────────────────────────────────────────────────────────────

def pack(arrays):
    """Concatenate arrays into one float64 vector; shapes come back from `shapes_of`."""
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=np.float64).reshape(-1) for a in arrays])


def shapes_of(arrays):
    return [tuple(np.shape(a)) for a in arrays]


def unpack(vector, shapes):
    sizes = [math.prod(s) for s in shapes]
    if sum(sizes) != vector.size:
        raise DimensionError(f"vector of {vector.size} entries for shapes totalling {sum(sizes)}")
    out, offset = [], 0
    for shape, size in zip(shapes, sizes):
        out.append(vector[offset: offset + size].reshape(shape))
        offset += size
    return out


# ─────────────────────────────────────────────────────────────────────────────
# Adam
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class AdamState:
    m: tuple
    v: tuple
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params, beta1=0.9, beta2=0.999, eps=1e-8):
    zeros = tuple(np.zeros(np.shape(p)) for p in params)
    return AdamState(zeros, tuple(np.zeros_like(z) for z in zeros), 0, beta1, beta2, eps)


def optimizer_step(params, grads, state, lr):
    """
    One Adam update. Returns (new_params, new_state); inputs are not modified.

    From zero moments, a zero gradient leaves the parameters unchanged.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("params, grads and moments must line up")
    if lr < 0:
        raise DomainError(f"learning rate must be non-negative, got {lr}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != np.shape(p):
            raise DimensionError(f"gradient {g.shape} does not match parameter {np.shape(p)}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_p.append(np.asarray(p, dtype=np.float64) - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(tuple(new_m), tuple(new_v), t, b1, b2, state.eps)


def reset_moments(state, index, keep):
    """Zero the moments of parameter `index` where `keep` is False."""
    m, v = list(state.m), list(state.v)
    m[index] = np.where(keep, m[index], 0.0)
    v[index] = np.where(keep, v[index], 0.0)
    return AdamState(tuple(m), tuple(v), state.t, state.beta1, state.beta2, state.eps)


# ─────────────────────────────────────────────────────────────────────────────
# L-BFGS
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_evals: int
    converged: bool
    message: str
    history: list = field(default_factory=list)


def _cubic_interpolate(x1, f1, g1, x2, f2, g2, bounds=None):
    if bounds is not None:
        lo, hi = bounds
    else:
        lo, hi = (x1, x2) if x1 <= x2 else (x2, x1)
    if not all(math.isfinite(v) for v in (x1, f1, g1, x2, f2, g2)):
        return (lo + hi) / 2.0
    d1 = g1 + g2 - 3 * (f1 - f2) / (x1 - x2)
    d2_square = d1 ** 2 - g1 * g2
    if d2_square >= 0:
        d2 = math.sqrt(d2_square)
        if x1 <= x2:
            min_pos = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2 * d2))
        else:
            min_pos = x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2 * d2))
        if math.isfinite(min_pos):
            return min(max(min_pos, lo), hi)
    return (lo + hi) / 2.0


def strong_wolfe(fg, x, t, d, f, g, gtd, c1=1e-4, c2=0.9, tolerance_change=1e-9, max_ls=25):
    """
    Line search along d satisfying the strong Wolfe conditions.

    Returns (f_new, g_new, t, n_evals). When no acceptable step is found the
    best point of the final bracket is returned, possibly t = 0.
    """
    d_norm = np.abs(d).max()
    f_new, g_new = fg(x + t * d)
    n_evals = 1
    gtd_new = float(g_new @ d)

    t_prev, f_prev, g_prev, gtd_prev = 0.0, f, g, gtd
    done = False
    ls_iter = 0
    while ls_iter < max_ls:
        if f_new > f + c1 * t * gtd or (ls_iter > 1 and f_new >= f_prev):
            bracket, bracket_f = [t_prev, t], [f_prev, f_new]
            bracket_g, bracket_gtd = [g_prev, g_new], [gtd_prev, gtd_new]
            break
        if abs(gtd_new) <= -c2 * gtd:
            bracket, bracket_f, bracket_g, bracket_gtd = [t], [f_new], [g_new], [gtd_new]
            done = True
            break
        if gtd_new >= 0:
            bracket, bracket_f = [t_prev, t], [f_prev, f_new]
            bracket_g, bracket_gtd = [g_prev, g_new], [gtd_prev, gtd_new]
            break

        min_step = t + 0.01 * (t - t_prev)
        max_step = t * 10
        previous = t
        t = _cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, bounds=(min_step, max_step))
        t_prev, f_prev, g_prev, gtd_prev = previous, f_new, g_new, gtd_new
        f_new, g_new = fg(x + t * d)
        n_evals += 1
        gtd_new = float(g_new @ d)
        ls_iter += 1

    if ls_iter == max_ls:
        bracket, bracket_f = [0.0, t], [f, f_new]
        bracket_g, bracket_gtd = [g, g_new], [gtd, gtd_new]

    # zoom
    insufficient_progress = False
    low, high = (0, 1) if bracket_f[0] <= bracket_f[-1] else (1, 0)
    while not done and ls_iter < max_ls:
        if abs(bracket[1] - bracket[0]) * d_norm < tolerance_change:
            break
        t = _cubic_interpolate(bracket[0], bracket_f[0], bracket_gtd[0],
                               bracket[1], bracket_f[1], bracket_gtd[1])
        eps = 0.1 * (max(bracket) - min(bracket))
        if min(max(bracket) - t, t - min(bracket)) < eps:
            if insufficient_progress or t >= max(bracket) or t <= min(bracket):
                if abs(t - max(bracket)) < abs(t - min(bracket)):
                    t = max(bracket) - eps
                else:
                    t = min(bracket) + eps
                insufficient_progress = False
            else:
                insufficient_progress = True
        else:
            insufficient_progress = False

        f_new, g_new = fg(x + t * d)
        n_evals += 1
        gtd_new = float(g_new @ d)
        ls_iter += 1

        if f_new > f + c1 * t * gtd or f_new >= bracket_f[low]:
            bracket[high], bracket_f[high], bracket_g[high], bracket_gtd[high] = t, f_new, g_new, gtd_new
            low, high = (0, 1) if bracket_f[0] <= bracket_f[1] else (1, 0)
        else:
            if abs(gtd_new) <= -c2 * gtd:
                done = True
            elif gtd_new * (bracket[high] - bracket[low]) >= 0:
                bracket[high], bracket_f[high] = bracket[low], bracket_f[low]
                bracket_g[high], bracket_gtd[high] = bracket_g[low], bracket_gtd[low]
            bracket[low], bracket_f[low], bracket_g[low], bracket_gtd[low] = t, f_new, g_new, gtd_new

    if len(bracket) == 1:
        low = 0
    return bracket_f[low], bracket_g[low], bracket[low], n_evals


def _two_loop(g, s_hist, y_hist):
    q = -g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        a = (s @ q) / (y @ s)
        alphas.append(a)
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = (y @ q) / (y @ s)
        q += s * (a - b)
    return q


def minimize_lbfgs(fg, x0, max_iter=50_000, history_size=10, gtol=1e-11, ftol=1e-15,
                   max_ls=100, callback=None):
    """
    Minimize f with L-BFGS. `fg(x)` returns (f, grad); an infinite f marks a
    point the line search must back away from.

    Stops when max|grad| <= gtol, when the relative decrease of f over an
    iteration is <= ftol, when max_iter is reached, or when the line search
    cannot make progress. f never increases between iterations.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fg(x)
    n_evals = 1
    if not math.isfinite(f):
        raise DivergenceError("objective is not finite at the starting point", partial=x)

    s_hist, y_hist = deque(maxlen=history_size), deque(maxlen=history_size)
    history = [f]
    message, converged = "max_iter reached", False

    for it in range(max_iter):
        if np.abs(g).max() <= gtol:
            message, converged = "gradient below gtol", True
            break

        d = _two_loop(g, s_hist, y_hist)
        gtd = float(g @ d)
        if gtd > -1e-300:
            s_hist.clear()
            y_hist.clear()
            d = -g
            gtd = float(-(g @ g))

        t0 = min(1.0, 1.0 / np.abs(g).sum()) if not s_hist else 1.0
        f_new, g_new, t, evals = strong_wolfe(fg, x, t0, d, f, g, gtd, max_ls=max_ls)
        n_evals += evals

        if not f_new < f or t == 0:
            if s_hist:
                logger.debug("L-BFGS iteration %d: line search stalled, resetting memory", it)
                s_hist.clear()
                y_hist.clear()
                continue
            message = "line search made no progress"
            break

        s = t * d
        y = g_new - g
        if y @ s > 1e-10 * (s @ s):
            s_hist.append(s)
            y_hist.append(y)

        x = x + s
        decrease = f - f_new
        f, g = f_new, g_new
        history.append(f)
        if callback is not None:
            callback(it, f)
        if decrease <= ftol * max(abs(f), abs(f + decrease), 1.0):
            message, converged = "relative decrease below ftol", True
            break

    return OptimizeResult(x, f, len(history) - 1, n_evals, converged, message, history)
