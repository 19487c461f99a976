"""Benchmark state-space models and their exact or numerical filtering oracles.

Two scalar models, both with Gaussian AR(1) state transitions and a standard
normal initial state:

* local level: X_t = X_{t-1} + N(0,1), Y_t = X_t + N(0, sigma_y^2).
  Admits an exact Kalman filter.
* stochastic volatility: X_t = 0.9 X_{t-1} + 0.25 N(0,1),
  Y_t = 0.1 N(0,1) exp(X_t / 2). Filtered by discretising the state onto a
  fine grid and running the forward recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

__all__ = [
    "LinearGaussianModel",
    "StochasticVolatilityModel",
    "make_model",
    "simulate",
    "KalmanOutput",
    "kalman_filter",
    "GridConfig",
    "GridPosterior",
    "grid_filter",
]

_LOG_2PI = math.log(2.0 * math.pi)


class LinearGaussianModel:
    """Random-walk state with additive Gaussian observation noise."""

    kind = "linear-gaussian"
    trans_coef = 1.0
    trans_sd = 1.0
    init_sd = 1.0

    def __init__(self, sigma_y: float):
        if not (sigma_y > 0):
            raise ValueError("sigma_y must be > 0")
        self.sigma_y = float(sigma_y)

    def sample_initial(self, n: int, rng) -> np.ndarray:
        return self.init_sd * rng.standard_normal(n)

    def sample_transition(self, x: np.ndarray, rng) -> np.ndarray:
        return self.trans_coef * x + self.trans_sd * rng.standard_normal(np.shape(x))

    def sample_observation(self, x: np.ndarray, rng) -> np.ndarray:
        return x + self.sigma_y * rng.standard_normal(np.shape(x))

    def obs_logpdf(self, x: np.ndarray, y: float) -> np.ndarray:
        z = (y - x) / self.sigma_y
        return -0.5 * (z * z) - math.log(self.sigma_y) - 0.5 * _LOG_2PI

    def marginal_sd(self, t: int) -> float:
        # Var(X_t) = Var(X_0) + t for a unit-noise random walk.
        return math.sqrt(self.init_sd**2 + t)


class StochasticVolatilityModel:
    """AR(1) log-volatility driving the scale of a mean-zero observation."""

    kind = "stoch-vol"
    trans_coef = 0.9
    trans_sd = 0.25
    init_sd = 1.0
    obs_scale = 0.1

    def sample_initial(self, n: int, rng) -> np.ndarray:
        return self.init_sd * rng.standard_normal(n)

    def sample_transition(self, x: np.ndarray, rng) -> np.ndarray:
        return self.trans_coef * x + self.trans_sd * rng.standard_normal(np.shape(x))

    def sample_observation(self, x: np.ndarray, rng) -> np.ndarray:
        return self.obs_scale * np.exp(x / 2.0) * rng.standard_normal(np.shape(x))

    def obs_logpdf(self, x: np.ndarray, y: float) -> np.ndarray:
        # y | x ~ N(0, obs_scale^2 * exp(x)); proper density for every y.
        var = self.obs_scale**2 * np.exp(x)
        return -0.5 * (y * y) / var - 0.5 * np.log(var) - 0.5 * _LOG_2PI

    def marginal_sd(self, t: int) -> float:
        # Stationary sd of the AR(1) state, used to size the grid.
        return self.trans_sd / math.sqrt(1.0 - self.trans_coef**2)


def make_model(kind: str, sigma_y: float | None = None):
    if kind == "linear-gaussian":
        if sigma_y is None:
            raise ValueError("linear-gaussian needs sigma_y")
        return LinearGaussianModel(sigma_y)
    if kind == "stoch-vol":
        return StochasticVolatilityModel()
    raise ValueError(f"unknown model {kind!r}")


def simulate(model, t_steps: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw a latent path X_1..X_T and observations Y_1..Y_T."""
    if t_steps < 1:
        raise ValueError("t_steps must be >= 1")
    states = np.empty(t_steps)
    obs = np.empty(t_steps)
    x = model.sample_initial(1, rng)
    for t in range(t_steps):
        x = model.sample_transition(x, rng)
        states[t] = x[0]
        obs[t] = model.sample_observation(x, rng)[0]
    return states, obs


class KalmanOutput(NamedTuple):
    means: np.ndarray  # filtered means m_{t|t}
    variances: np.ndarray  # filtered variances P_{t|t}
    loglik: np.ndarray  # log p(y_t | y_{1:t-1})


def kalman_filter(observations, sigma_y: float) -> KalmanOutput:
    """Exact filter for the local-level model with unit state noise.

    Starts from the standard normal prior; the step-t likelihood term is the
    normal log-density of y_t with mean m_{t-1|t-1} and variance
    P_{t-1|t-1} + 1 + sigma_y^2.
    """
    if not (sigma_y > 0):
        raise ValueError("sigma_y must be > 0")
    y = np.asarray(observations, dtype=np.float64)
    t_steps = y.size
    means = np.empty(t_steps)
    variances = np.empty(t_steps)
    loglik = np.empty(t_steps)
    m, p = 0.0, 1.0
    r = sigma_y * sigma_y
    for t in range(t_steps):
        p_pred = p + 1.0
        s = p_pred + r
        loglik[t] = -0.5 * ((y[t] - m) ** 2 / s + math.log(s) + _LOG_2PI)
        gain = p_pred / s
        m = m + gain * (y[t] - m)
        p = (1.0 - gain) * p_pred
        means[t] = m
        variances[t] = p
    return KalmanOutput(means=means, variances=variances, loglik=loglik)


@dataclass(frozen=True)
class GridConfig:
    range_sd_multiple: float = 8.0
    points: int = 4001


class GridPosterior(NamedTuple):
    grid: np.ndarray  # G state points, strictly increasing
    filtered: np.ndarray  # T x G rows, each a probability vector
    means: np.ndarray  # posterior means per step
    loglik: np.ndarray  # log p(y_t | y_{1:t-1}) per step


def grid_filter(observations, model, config: GridConfig = GridConfig()) -> GridPosterior:
    """Forward recursion on a discretised state space.

    The transition kernel rows are the model's Gaussian transition density
    evaluated on the grid and renormalised (compensating truncation); the
    likelihood increment is the pre-normalisation mass of the updated row.
    """
    y = np.asarray(observations, dtype=np.float64)
    t_steps = y.size
    if t_steps < 1:
        raise ValueError("need at least one observation")
    if config.points < 2:
        raise ValueError("grid needs at least two points")
    half_width = config.range_sd_multiple * model.marginal_sd(t_steps)
    if not (half_width > 0):
        raise ValueError("degenerate grid: zero width")
    grid = np.linspace(-half_width, half_width, config.points)

    kernel = _cached_transition_matrix(
        half_width, config.points, model.trans_coef, model.trans_sd
    )
    f = np.exp(-0.5 * (grid / model.init_sd) ** 2)
    f /= f.sum()

    filtered = np.empty((t_steps, grid.size))
    means = np.empty(t_steps)
    loglik = np.empty(t_steps)
    for t in range(t_steps):
        predicted = f @ kernel
        updated = predicted * np.exp(model.obs_logpdf(grid, y[t]))
        mass = float(updated.sum())
        if not (mass > 0):
            raise FloatingPointError(f"grid filter mass vanished at step {t}")
        loglik[t] = math.log(mass)
        f = updated / mass
        filtered[t] = f
        means[t] = float(f @ grid)
    return GridPosterior(grid=grid, filtered=filtered, means=means, loglik=loglik)


@lru_cache(maxsize=2)
def _cached_transition_matrix(half_width: float, points: int, coef: float, sd: float) -> np.ndarray:
    """Row-normalised Gaussian transition densities on the grid.

    Cached because repeated filter runs over same-sized problems share the
    kernel; the returned array is marked read-only.
    """
    grid = np.linspace(-half_width, half_width, points)
    kernel = np.empty((points, points))
    chunk = max(1, 2**22 // points)  # bound temporaries to a few tens of MB
    inv_two_var = 0.5 / (sd * sd)
    for start in range(0, points, chunk):
        stop = min(start + chunk, points)
        centred = grid[None, :] - coef * grid[start:stop, None]
        np.exp(-inv_two_var * centred * centred, out=kernel[start:stop])
    kernel /= kernel.sum(axis=1, keepdims=True)
    kernel.flags.writeable = False
    return kernel
