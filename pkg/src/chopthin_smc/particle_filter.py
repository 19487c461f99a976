"""Bootstrap particle filter, generic over model and resampling scheme.

The filter propagates with the model transition, reweights by the observation
likelihood, and resamples back to the target size whenever the effective
sample size drops to the trigger ``beta`` (so ``beta = N`` resamples every
step, ``beta = 0`` never does). After each resample the weights are rescaled
to sum to the target count. The per-step conditional likelihood estimate is
the ratio of post- to pre-update weight sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .resamplers import SCHEMES, DegeneracyError, resample
from .weights import ess, normalize_to

__all__ = ["PfConfig", "PfOutput", "pf_run", "DegeneracyError"]


@dataclass(frozen=True)
class PfConfig:
    """Filter settings: target size, ESS trigger, scheme and its ratio bound."""

    n_particles: int
    beta: float
    scheme: str
    eta: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if not (0 <= self.beta <= self.n_particles):
            raise ValueError("beta must lie in [0, n_particles]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if (self.scheme == "chopthin") != (self.eta is not None):
            raise ValueError("eta must be given exactly when the scheme is chopthin")


@dataclass(frozen=True)
class PfOutput:
    """Per-step filter products (arrays of length T)."""

    posterior_means: np.ndarray
    cond_lik: np.ndarray  # estimates of p(y_t | y_{1:t-1})
    ess_before: np.ndarray
    ess_after: np.ndarray
    resampled: np.ndarray  # bool per step
    n_particles: np.ndarray  # population size after each step

    @property
    def log_marginal(self) -> float:
        return float(np.sum(np.log(self.cond_lik)))


def pf_run(model, observations, cfg: PfConfig, rng=None) -> PfOutput:
    """Run the filter over ``observations``; deterministic per (seed, cfg, data).

    Raises :class:`DegeneracyError` naming the step if every particle lands in
    a zero-likelihood region.
    """
    y = np.asarray(observations, dtype=np.float64)
    if y.size == 0:
        raise ValueError("observations must be nonempty")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    x = model.sample_initial(cfg.n_particles, rng)
    w = np.ones(cfg.n_particles)

    t_steps = y.size
    out = PfOutput(
        posterior_means=np.empty(t_steps),
        cond_lik=np.empty(t_steps),
        ess_before=np.empty(t_steps),
        ess_after=np.empty(t_steps),
        resampled=np.zeros(t_steps, dtype=bool),
        n_particles=np.empty(t_steps, dtype=np.int64),
    )
    for t in range(t_steps):
        x = model.sample_transition(x, rng)
        pre_sum = float(np.sum(w))
        w = w * np.exp(model.obs_logpdf(x, y[t]))
        post_sum = float(np.sum(w))
        if not (post_sum > 0) or not np.isfinite(post_sum):
            raise DegeneracyError(
                f"total particle weight collapsed at step {t + 1}", step=t + 1
            )
        out.cond_lik[t] = post_sum / pre_sum
        ess_now = ess(w)
        out.ess_before[t] = ess_now
        if ess_now <= cfg.beta:
            result = resample(cfg.scheme, w, cfg.n_particles, rng, eta=cfg.eta)
            x = x[result.ancestors]
            w = normalize_to(result.weights, cfg.n_particles)
            ess_now = ess(w)
            out.resampled[t] = True
        out.ess_after[t] = ess_now
        out.posterior_means[t] = float(np.dot(w, x)) / float(np.sum(w))
        out.n_particles[t] = w.size
    return out
