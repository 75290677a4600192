"""Expected-improvement acquisition over a configuration box.

Closed-form EI and its analytic gradient through the GP posterior, maximized
by multi-start projected gradient ascent with Armijo backtracking, then
rounded onto the valid integer dBm grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr

from .gp import SQRT3, GpModel, PosteriorStats
from .topology import (
    OBSS_PD_MAX,
    OBSS_PD_MIN,
    TX_PWR_MAX,
    TX_PWR_MIN,
    Configuration,
)

SIGMA_FLOOR = 1e-6
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcquisitionConfig:
    restarts: int = 10
    max_steps: int = 100
    convergence_tol: float = 1e-5  # normalized units
    armijo_c: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 0.1

    def __post_init__(self):
        if self.restarts < 1 or self.max_steps < 1:
            raise ValueError("restarts and max_steps must be >= 1")


def _phi(z: np.ndarray) -> np.ndarray:
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _ei_values(means: np.ndarray, variances: np.ndarray, incumbent: float) -> np.ndarray:
    sigma = np.sqrt(np.maximum(variances, 0.0))
    diff = means - incumbent
    out = np.maximum(diff, 0.0)
    live = sigma > 0.0
    if np.any(live):
        z = diff[live] / sigma[live]
        out[live] = diff[live] * ndtr(z) + sigma[live] * _phi(z)
    return np.maximum(out, 0.0)


def expected_improvement(stats: PosteriorStats, incumbent: float) -> float:
    """Expected positive gap over the incumbent under the posterior."""
    return float(_ei_values(np.array([stats.mean]), np.array([stats.variance]), incumbent)[0])


def _ei_batch(model: GpModel, U: np.ndarray, incumbent: float) -> np.ndarray:
    means, variances = model.posterior_batch(model.denormalize(U))
    return _ei_values(means, variances, incumbent)


def _ei_and_grad_batch(
    model: GpModel, U: np.ndarray, incumbent: float
) -> tuple[np.ndarray, np.ndarray]:
    """EI and dEI/dU at normalized query rows U.

    Chain rule: dEI = Phi(Z) dmu + phi(Z) dsigma, with the posterior mean and
    variance differentiated through the Matern kernel (smooth at r = 0).
    """
    X = model._X
    t = len(X)
    q, d = U.shape
    if t == 0:
        return np.full(q, 0.0), np.zeros((q, d))
    params = model.params
    c = SQRT3 / params.length_scale

    diff = U[:, None, :] - X[None, :, :]  # (q, t, d)
    r = np.sqrt(np.einsum("qtd,qtd->qt", diff, diff))
    E = np.exp(-c * r)
    Kx = params.signal_variance * (1.0 + c * r) * E  # (q, t)

    alpha = model._ensure_alpha()
    means = model.target_mean + Kx @ alpha
    V = solve_triangular(model._L, Kx.T, lower=True, check_finite=False)  # (t, q)
    variances = np.maximum(params.signal_variance - (V * V).sum(axis=0), 0.0)
    sigma = np.sqrt(variances)

    # dk(u, x_i)/du = -s^2 c^2 e^{-cr} (u - x_i); contract over training points.
    w = params.signal_variance * c * c * E  # (q, t)
    beta = solve_triangular(model._L.T, V, lower=False, check_finite=False)  # K^-1 Kx.T
    dmu = -np.matmul((w * alpha)[:, None, :], diff)[:, 0, :]
    dvar = 2.0 * np.matmul((w * beta.T)[:, None, :], diff)[:, 0, :]

    ei = _ei_values(means, variances, incumbent)
    grad = np.zeros((q, d))
    live = sigma > SIGMA_FLOOR
    if np.any(live):
        z = (means[live] - incumbent) / sigma[live]
        dsigma = dvar[live] / (2.0 * sigma[live])[:, None]
        grad[live] = ndtr(z)[:, None] * dmu[live] + _phi(z)[:, None] * dsigma
    return ei, grad


def ei_gradient(model: GpModel, x: Sequence[float], incumbent: float | None = None) -> np.ndarray:
    """Analytic EI gradient in raw input units; zero where sigma is degenerate."""
    if not len(model):
        raise ValueError("ei_gradient requires a nonempty model")
    inc = model.incumbent if incumbent is None else incumbent
    u = model.normalize(x)[None, :]
    _, grad = _ei_and_grad_batch(model, u, inc)
    return grad[0] / (model.upper - model.lower)


def maximize_ei(
    model: GpModel,
    bounds: tuple[Sequence[float], Sequence[float]] | None = None,
    cfg: AcquisitionConfig | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Best continuous point found by multi-start projected gradient ascent.

    With no observations yet there is nothing to model: a uniform draw from
    the box bootstraps exploration. Restart seeds are drawn from ``rng`` in
    order, so a longer restart budget extends (never reshuffles) the starts.
    """
    cfg = cfg or AcquisitionConfig()
    rng = rng or np.random.default_rng()
    lower = np.asarray(bounds[0], dtype=float) if bounds else model.lower
    upper = np.asarray(bounds[1], dtype=float) if bounds else model.upper
    dim = len(lower)
    if not len(model):
        return rng.uniform(lower, upper)

    inc = model.incumbent
    U = rng.uniform(0.0, 1.0, size=(cfg.restarts, dim))
    x = U.copy()
    f, g = _ei_and_grad_batch(model, x, inc)
    step = np.full(cfg.restarts, cfg.initial_step)
    active = np.ones(cfg.restarts, dtype=bool)

    for _ in range(cfg.max_steps):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xs, fs, gs = x[idx], f[idx], g[idx]
        trial = step[idx].copy()

        # Speculative first trial evaluates EI and gradient together: when the
        # step is accepted (the common case) the gradient is already in hand.
        proposal = np.clip(xs + trial[:, None] * gs, 0.0, 1.0)
        f_prop, g_prop = _ei_and_grad_batch(model, proposal, inc)
        gain = np.einsum("qd,qd->q", gs, proposal - xs)
        ok = f_prop >= fs + cfg.armijo_c * gain
        cand, f_cand, g_cand = xs.copy(), fs.copy(), gs.copy()
        cand[ok], f_cand[ok], g_cand[ok] = proposal[ok], f_prop[ok], g_prop[ok]
        accepted = ok.copy()
        backtracked = ~ok

        for _ in range(14):
            todo = ~accepted
            if not todo.any():
                break
            trial[todo] *= cfg.shrink
            dead = todo & (trial < 1e-7)
            accepted |= dead  # give up on these: no move
            todo &= ~dead
            if not todo.any():
                break
            retry = np.clip(xs[todo] + trial[todo, None] * gs[todo], 0.0, 1.0)
            f_retry = _ei_batch(model, retry, inc)
            gain = np.einsum("qd,qd->q", gs[todo], retry - xs[todo])
            ok = f_retry >= fs[todo] + cfg.armijo_c * gain
            ids = np.flatnonzero(todo)[ok]
            cand[ids], f_cand[ids] = retry[ok], f_retry[ok]
            accepted[ids] = True

        late = backtracked & (f_cand > fs)  # moved after shrinking: stale grad
        if late.any():
            _, g_cand[late] = _ei_and_grad_batch(model, cand[late], inc)

        moved = np.abs(cand - xs).max(axis=1)
        x[idx], f[idx], g[idx] = cand, f_cand, g_cand
        # Grow the step only after a clean first-try acceptance; growing after
        # a backtracked move just re-triggers the overshoot on the next step.
        step[idx] = np.where(backtracked, trial, np.minimum(trial * 2.0, 0.25))
        done = (moved <= cfg.convergence_tol) | (f_cand - fs <= 1e-12 * (1.0 + np.abs(fs)))
        active[idx[done]] = False

    best = int(np.argmax(f))
    return model.denormalize(x[best]) if bounds is None else lower + x[best] * (upper - lower)


# ---------------------------------------------------------------------------
# Grid rounding
# ---------------------------------------------------------------------------

_OBSS_CENTER = (OBSS_PD_MIN + OBSS_PD_MAX) / 2.0
_TX_CENTER = (TX_PWR_MIN + TX_PWR_MAX) / 2.0


def _round_coord(v: float, lo: int, hi: int, center: float) -> int:
    base = math.floor(v)
    if abs(v - (base + 0.5)) <= 1e-9:  # half-integer: break toward the center
        k = base if abs(base - center) <= abs(base + 1 - center) else base + 1
    else:
        k = math.floor(v + 0.5)
    return min(max(k, lo), hi)


def round_to_grid(x: Sequence[float]) -> list[Configuration]:
    """Snap an interleaved (obss_pd, tx_pwr, ...) vector onto the valid grid."""
    vec = np.asarray(x, dtype=float)
    if vec.ndim != 1 or len(vec) % 2:
        raise ValueError("expected a flat vector of (obss_pd, tx_pwr) pairs")
    configs = []
    for i in range(0, len(vec), 2):
        obss = _round_coord(vec[i], OBSS_PD_MIN, OBSS_PD_MAX, _OBSS_CENTER)
        tx = _round_coord(vec[i + 1], TX_PWR_MIN, TX_PWR_MAX, _TX_CENTER)
        configs.append(Configuration(obss, tx))
    return configs
