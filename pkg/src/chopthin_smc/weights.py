"""Weight-vector arithmetic: ESS, normalisation, ratio and the ESS floor.

All functions accept any 1-d sequence of weights and work on float64 copies.
Weights may contain zeros (zero entries are legitimate importance weights)
except where a ratio is taken.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "as_weights",
    "ess",
    "normalize_to",
    "weight_ratio",
    "ess_lower_bound",
    "eta_for_gamma",
]


def as_weights(values, *, require_positive: bool = False) -> np.ndarray:
    """Validate a weight vector and return it as a float64 array.

    Requires a nonempty vector of finite, nonnegative entries with a positive
    total. With ``require_positive`` every single entry must be > 0.
    """
    w = np.asarray(values, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if require_positive and np.any(w == 0):
        raise ValueError("weights must all be strictly positive")
    total = float(np.sum(w))
    if not (total > 0):
        raise ValueError("weights must have a positive total")
    return w


def ess(values) -> float:
    """Effective sample size (sum w)^2 / sum w^2, a value in [1, n].

    Scale invariant: ess(c*w) == ess(w) for any c > 0. Zero entries
    contribute nothing.
    """
    w = as_weights(values)
    total = float(np.sum(w))
    return total * total / float(np.dot(w, w))


def normalize_to(values, total: float) -> np.ndarray:
    """Rescale weights so they sum to ``total``, preserving proportions."""
    if not (total > 0):
        raise ValueError("total must be > 0")
    w = as_weights(values)
    return w * (total / float(np.sum(w)))


def weight_ratio(values) -> float:
    """max(w) / min(w), defined only for strictly positive weights."""
    w = as_weights(values, require_positive=True)
    return float(np.max(w)) / float(np.min(w))


def ess_lower_bound(eta: float, n: int) -> float:
    """Closed-form floor on the ESS of any n positive weights with ratio <= eta.

    Evaluates 4*(eta*n + 1 - eta^2) / (eta + 1)^2. Decreasing in eta for
    fixed n; equals n at eta = 1.
    """
    if eta < 1:
        raise ValueError("eta must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    return 4.0 * (eta * n + 1.0 - eta * eta) / ((eta + 1.0) ** 2)


def eta_for_gamma(gamma: float) -> float:
    """Weight-ratio bound whose large-n ESS floor is gamma*n.

    Inverts gamma = 4*eta/(eta+1)^2 on eta >= 1:
    eta = (2 - gamma + 2*sqrt(1 - gamma)) / gamma.
    """
    if not (0 < gamma <= 1):
        raise ValueError("gamma must be in (0, 1]")
    return (2.0 - gamma + 2.0 * math.sqrt(1.0 - gamma)) / gamma
