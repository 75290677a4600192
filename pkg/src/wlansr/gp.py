"""Gaussian-process regression over configuration vectors.

Matern-3/2 kernel on inputs normalized to the unit box, exact posterior via
a maintained Cholesky factor (extended one row per observation), marginal
likelihood hyperparameter fitting, and a moving-window cap on the training
set to bound per-step cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotri
from scipy.optimize import minimize

SQRT3 = math.sqrt(3.0)
DEFAULT_WINDOW = 200
NOISE_FLOOR_RATIO = 1e-6  # noise_variance >= ratio * signal_variance


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float = 1.0
    length_scale: float = 0.3
    noise_variance: float = 1e-4

    def __post_init__(self):
        if self.signal_variance <= 0 or self.length_scale <= 0:
            raise ValueError("signal_variance and length_scale must be > 0")
        floor = NOISE_FLOOR_RATIO * self.signal_variance
        object.__setattr__(self, "noise_variance", max(float(self.noise_variance), floor))


@dataclass(frozen=True)
class PosteriorStats:
    mean: float
    variance: float


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def _matern32(r: np.ndarray, params: KernelParams) -> np.ndarray:
    c = SQRT3 / params.length_scale
    return params.signal_variance * (1.0 + c * r) * np.exp(-c * r)


def kernel(u: Sequence[float], v: Sequence[float], params: KernelParams) -> float:
    """Matern-3/2 covariance between two normalized vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    r = float(np.linalg.norm(u - v))
    return float(_matern32(np.array(r), params))


def _kernel_matrix(a: np.ndarray, b: np.ndarray, params: KernelParams) -> np.ndarray:
    return _matern32(np.sqrt(_sq_dists(a, b)), params)


class GpModel:
    """Exact GP over a box of configuration vectors.

    Raw inputs are normalized per dimension to [0, 1] before any kernel
    distance. Targets are centered on their empirical mean (restored on
    prediction) so the zero-mean prior matches data living far from zero.
    """

    def __init__(
        self,
        lower: Sequence[float],
        upper: Sequence[float],
        params: KernelParams | None = None,
        window: int = DEFAULT_WINDOW,
    ):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise ValueError("invalid box bounds")
        if window < 1:
            raise ValueError("window must be >= 1")
        self.params = params or KernelParams()
        self.window = window
        self.dim = len(self.lower)
        self._X = np.empty((0, self.dim))
        self._y = np.empty(0)
        self._L = np.empty((0, 0))
        self._alpha: np.ndarray | None = None

    # -- basic state ------------------------------------------------------

    def __len__(self) -> int:
        return len(self._y)

    @property
    def inputs(self) -> np.ndarray:
        return self._X.copy()

    @property
    def targets(self) -> np.ndarray:
        return self._y.copy()

    @property
    def target_mean(self) -> float:
        return float(self._y.mean()) if len(self._y) else 0.0

    @property
    def incumbent(self) -> float:
        if not len(self._y):
            raise ValueError("empty model has no incumbent")
        return float(self._y.max())

    @property
    def chol(self) -> np.ndarray:
        return self._L.copy()

    def normalize(self, x: Sequence[float]) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower)

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    # -- factor maintenance ------------------------------------------------

    def _diag_value(self) -> float:
        return self.params.signal_variance + self.params.noise_variance

    def _refactor(self) -> None:
        t = len(self._y)
        if t == 0:
            self._L = np.empty((0, 0))
            self._alpha = None
            return
        K = _kernel_matrix(self._X, self._X, self.params)
        K[np.diag_indices_from(K)] = self._diag_value()
        jitter = 0.0
        for _ in range(6):
            try:
                self._L = np.linalg.cholesky(K + jitter * np.eye(t))
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 10.0, 1e-10 * self.params.signal_variance)
        else:
            raise np.linalg.LinAlgError("kernel matrix not positive definite")
        self._alpha = None

    def _refresh_alpha(self) -> None:
        yc = self._y - self._y.mean()
        self._alpha = cho_solve((self._L, True), yc, check_finite=False)

    def _ensure_alpha(self) -> np.ndarray:
        if self._alpha is None:
            self._refresh_alpha()
        return self._alpha

    def add(self, x: Sequence[float], y: float) -> "GpModel":
        """Append one observation, extending the Cholesky factor by one row.

        When the window is full the oldest observation is evicted first and
        the factor rebuilt from scratch (eviction invalidates all rows).
        """
        if not math.isfinite(y):
            raise ValueError(f"non-finite target {y!r}")
        xn = self.normalize(x)
        if xn.shape != (self.dim,):
            raise ValueError(f"expected {self.dim}-dim input, got shape {xn.shape}")
        evict = len(self._y) >= self.window
        if evict:
            self._X = np.vstack([self._X[1:], xn])
            self._y = np.append(self._y[1:], float(y))
            self._refactor()
            return self
        t = len(self._y)
        self._X = np.vstack([self._X, xn]) if t else xn[None, :]
        self._y = np.append(self._y, float(y))
        if t == 0:
            self._L = np.array([[math.sqrt(self._diag_value())]])
        else:
            k = _kernel_matrix(self._X[:t], xn[None, :], self.params)[:, 0]
            l_row = solve_triangular(self._L, k, lower=True, check_finite=False)
            d_sq = self._diag_value() - float(l_row @ l_row)
            d = math.sqrt(max(d_sq, 1e-12 * self.params.signal_variance))
            new_L = np.zeros((t + 1, t + 1))
            new_L[:t, :t] = self._L
            new_L[t, :t] = l_row
            new_L[t, t] = d
            self._L = new_L
        self._alpha = None
        return self

    # -- inference ----------------------------------------------------------

    def posterior_batch(self, X_raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Means and variances at a batch of raw-unit query points."""
        Xq = np.atleast_2d(np.asarray(X_raw, dtype=float))
        Un = (Xq - self.lower) / (self.upper - self.lower)
        t = len(self._y)
        if t == 0:
            return np.zeros(len(Un)), np.full(len(Un), self.params.signal_variance)
        Kx = _kernel_matrix(self._X, Un, self.params)  # (t, q)
        alpha = self._ensure_alpha()
        means = self._y.mean() + Kx.T @ alpha
        V = solve_triangular(self._L, Kx, lower=True, check_finite=False)
        variances = np.maximum(self.params.signal_variance - (V * V).sum(axis=0), 0.0)
        return means, variances

    def posterior(self, x: Sequence[float]) -> PosteriorStats:
        means, variances = self.posterior_batch(np.asarray(x, dtype=float)[None, :])
        return PosteriorStats(float(means[0]), float(variances[0]))

    # -- hyperparameters ----------------------------------------------------

    def log_marginal_likelihood(self, params: KernelParams | None = None) -> float:
        if not len(self._y):
            raise ValueError("empty model has no likelihood")
        if params is None or params == self.params:
            L = self._L
            alpha = self._ensure_alpha()
        else:
            K = _kernel_matrix(self._X, self._X, params)
            K[np.diag_indices_from(K)] = params.signal_variance + params.noise_variance
            L = np.linalg.cholesky(K)
            alpha = cho_solve((L, True), self._y - self._y.mean(), check_finite=False)
        yc = self._y - self._y.mean()
        t = len(yc)
        return float(-0.5 * yc @ alpha - np.log(np.diag(L)).sum() - 0.5 * t * math.log(2 * math.pi))

    def _nll_and_grad(self, log_theta: np.ndarray, r: np.ndarray, yc: np.ndarray):
        s2, rho, noise = np.exp(log_theta)
        c = SQRT3 / rho
        E = np.exp(-c * r)
        K = s2 * (1.0 + c * r) * E
        t = len(yc)
        K[np.diag_indices_from(K)] = s2 + noise
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            return 1e25, np.zeros(3)
        alpha = cho_solve((L, True), yc, check_finite=False)
        nll = 0.5 * yc @ alpha + np.log(np.diag(L)).sum() + 0.5 * t * math.log(2 * math.pi)
        Kinv, info = dpotri(L, lower=1)
        if info != 0:
            return 1e25, np.zeros(3)
        Kinv = Kinv + np.tril(Kinv, -1).T  # dpotri fills one triangle
        W = np.outer(alpha, alpha) - Kinv  # dLML/dtheta = 0.5 tr(W dK/dtheta)
        dK_s2 = K.copy()
        dK_s2[np.diag_indices_from(dK_s2)] = s2
        dK_rho = 3.0 * s2 * (r / rho) ** 2 * E
        grad = -0.5 * np.array(
            [
                (W * dK_s2).sum(),
                (W * dK_rho).sum(),
                np.diag(W).sum() * noise,
            ]
        )
        return float(nll), grad

    def optimize_hyperparams(self, max_iter: int = 15, starts: int = 4) -> KernelParams:
        """Fit (signal variance, length scale, noise) by marginal likelihood.

        Multi-start L-BFGS over log parameters: the current values plus
        ``starts - 1`` fixed pseudo-random starts inside the bounds. Never
        returns a fit worse than the current parameters.
        """
        t = len(self._y)
        if t < 5:
            raise ValueError("need at least 5 observations to fit hyperparameters")
        var_y = float(self._y.var())
        if var_y <= 0.0:
            params = KernelParams(max(var_y, 1e-8), self.params.length_scale, 0.0)
            self.params = params
            self._refactor()
            return params
        r = np.sqrt(_sq_dists(self._X, self._X))
        yc = self._y - self._y.mean()
        bounds_log = [
            (math.log(1e-4 * var_y), math.log(1e4 * var_y)),
            (math.log(0.01), math.log(10.0)),
            (math.log(1e-6 * var_y), math.log(var_y)),
        ]
        current = np.log(
            [
                np.clip(self.params.signal_variance, 1e-4 * var_y, 1e4 * var_y),
                np.clip(self.params.length_scale, 0.01, 10.0),
                np.clip(self.params.noise_variance, 1e-6 * var_y, var_y),
            ]
        )
        rng = np.random.default_rng(0)
        start_points = [current] + [
            np.array([rng.uniform(lo, hi) for lo, hi in bounds_log]) for _ in range(starts - 1)
        ]
        best_theta, best_nll = current, self._nll_and_grad(current, r, yc)[0]
        for theta0 in start_points:
            res = minimize(
                self._nll_and_grad,
                theta0,
                args=(r, yc),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds_log,
                options={"maxiter": max_iter},
            )
            if res.fun < best_nll:
                best_nll, best_theta = res.fun, res.x
        s2, rho, noise = np.exp(best_theta)
        params = KernelParams(float(s2), float(rho), float(noise))
        self.params = params
        self._refactor()
        return params


# Spec-surface aliases over the class API.

def add_observation(model: GpModel, x: Sequence[float], y: float) -> GpModel:
    return model.add(x, y)


def posterior(model: GpModel, x: Sequence[float]) -> PosteriorStats:
    return model.posterior(x)


def optimize_hyperparams(model: GpModel) -> KernelParams:
    return model.optimize_hyperparams()
