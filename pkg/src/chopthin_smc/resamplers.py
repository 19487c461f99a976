"""Baseline resampling schemes, all returning equal-weight offspring.

Every scheme draws ancestors with expected count n_out * w_i / sum(w) per
particle. The fixed-size schemes return exactly ``n_out`` offspring;
``branching`` rounds each expected count independently, so its output size is
random with mean ``n_out``. The bounded-ratio chop/thin scheme lives in
:mod:`chopthin_smc.chopthin` and is reached through :func:`resample`.
"""

from __future__ import annotations

import numpy as np

from .chopthin import ResampleResult, chopthin, systematic_counts
from .weights import as_weights

__all__ = [
    "SCHEMES",
    "BASELINE_SCHEMES",
    "DegeneracyError",
    "baseline_resample",
    "resample",
]

BASELINE_SCHEMES = (
    "multinomial",
    "multinomial-condbinom",
    "systematic",
    "stratified",
    "residual",
    "residual-stratified",
    "branching",
)
SCHEMES = BASELINE_SCHEMES + ("chopthin",)


class DegeneracyError(RuntimeError):
    """A particle population collapsed (zero total weight or empty output)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


def _inverse_cdf(w: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Map positions in [0, total) to particle indices via the weight CDF."""
    cum = np.cumsum(w)
    idx = np.searchsorted(cum, positions, side="right")
    return np.minimum(idx, w.size - 1)


def _floor_counts(w: np.ndarray, n_out: int) -> tuple[np.ndarray, np.ndarray, int]:
    expected = w * (n_out / float(np.sum(w)))
    base = np.floor(expected)
    fracs = expected - base
    return base.astype(np.int64), fracs, n_out - int(np.sum(base))


def baseline_resample(scheme: str, w, n_out: int, rng) -> ResampleResult:
    """Run one of the equal-weight baseline schemes.

    Parameters
    ----------
    scheme : str
        One of ``BASELINE_SCHEMES``.
    w : array_like
        Nonnegative weights with positive total.
    n_out : int
        Target offspring count (exact except for ``branching``).
    rng : numpy.random.Generator
        Source of uniforms and binomial draws.
    """
    if scheme not in BASELINE_SCHEMES:
        raise ValueError(f"unknown baseline scheme {scheme!r}; choose from {BASELINE_SCHEMES}")
    n_out = int(n_out)
    if n_out < 1:
        raise ValueError(f"target particle count must be >= 1, got {n_out}")
    w = as_weights(w)
    total = float(np.sum(w))

    if scheme == "multinomial":
        ancestors = _inverse_cdf(w, rng.random(n_out) * total)
    elif scheme == "multinomial-condbinom":
        ancestors = np.repeat(np.arange(w.size), _condbinom_counts(w, n_out, rng))
    elif scheme == "systematic":
        counts = systematic_counts(w, n_out, rng.random())
        ancestors = np.repeat(np.arange(w.size), counts)
    elif scheme == "stratified":
        positions = (np.arange(n_out) + rng.random(n_out)) / n_out
        ancestors = _inverse_cdf(w, positions * total)
    elif scheme == "residual":
        base, fracs, n_extra = _floor_counts(w, n_out)
        deterministic = np.repeat(np.arange(w.size), base)
        extra = _inverse_cdf(fracs, rng.random(n_extra) * float(np.sum(fracs)))
        ancestors = np.concatenate([deterministic, extra])
    elif scheme == "residual-stratified":
        base, fracs, n_extra = _floor_counts(w, n_out)
        deterministic = np.repeat(np.arange(w.size), base)
        if n_extra > 0:
            positions = (np.arange(n_extra) + rng.random(n_extra)) / n_extra
            extra = _inverse_cdf(fracs, positions * float(np.sum(fracs)))
        else:
            extra = np.zeros(0, dtype=np.int64)
        ancestors = np.concatenate([deterministic, extra])
    else:  # branching
        expected = w * (n_out / total)
        base = np.floor(expected)
        counts = base.astype(np.int64) + (rng.random(w.size) < expected - base)
        if int(np.sum(counts)) == 0:
            raise DegeneracyError("branching realised zero offspring")
        ancestors = np.repeat(np.arange(w.size), counts)

    weights = np.full(ancestors.size, total / ancestors.size)
    return ResampleResult(ancestors=ancestors, weights=weights)


def _condbinom_counts(w: np.ndarray, n_out: int, rng) -> np.ndarray:
    """Sequential conditional-binomial multinomial counts."""
    counts = np.zeros(w.size, dtype=np.int64)
    remaining = n_out
    mass_left = float(np.sum(w))
    for i in range(w.size - 1):
        if remaining == 0:
            break
        p = min(max(w[i] / mass_left, 0.0), 1.0) if mass_left > 0 else 1.0
        c = int(rng.binomial(remaining, p))
        counts[i] = c
        remaining -= c
        mass_left = max(mass_left - float(w[i]), 0.0)
    counts[-1] += remaining
    return counts


def resample(scheme: str, w, n_out: int, rng, eta: float | None = None) -> ResampleResult:
    """Dispatch to chop/thin or a baseline scheme."""
    if scheme == "chopthin":
        if eta is None:
            raise ValueError("chopthin requires eta")
        return chopthin(w, eta, n_out, rng)
    if eta is not None:
        raise ValueError(f"eta is only meaningful for chopthin, not {scheme!r}")
    return baseline_resample(scheme, w, n_out, rng)
