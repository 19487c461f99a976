"""Bounded weight-ratio resampling by chopping heavy and thinning light particles.

The resampler keeps every output weight inside [a, eta*a] for a threshold
``a`` chosen so the expected offspring counts sum to the target particle
number. Particles with weight below ``a`` survive with probability w/a and
take weight ``a`` (thinning); particles above ``eta*a/2`` are split into
replicates sharing their adjusted weight (chopping); everything in between
passes through untouched except for a mass correction shared across the
fractional chop counts.

``solve_a`` finds the threshold by a randomised pivot sweep over two shrinking
candidate lists, giving expected effort linear in the input size;
``solve_a_oracle`` is a deliberately independent bisection used to
cross-check it.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .weights import as_weights

__all__ = [
    "ResampleResult",
    "h_eval",
    "systematic_counts",
    "solve_a",
    "solve_a_oracle",
    "chopthin",
]


class ResampleResult(NamedTuple):
    """Ancestor indices (0-based, into the input vector) and their new weights."""

    ancestors: np.ndarray
    weights: np.ndarray


def _validate_eta(eta: float) -> float:
    eta = float(eta)
    if not np.isfinite(eta) or eta < 4.0:
        raise ValueError(f"eta must be >= 4 for continuous chop/thin counts, got {eta}")
    return eta


def _validate_n_out(n_out: int) -> int:
    n = int(n_out)
    if n < 1:
        raise ValueError(f"target particle count must be >= 1, got {n_out}")
    return n


def h_eval(w, a: float, eta: float):
    """Expected offspring count for weight ``w`` at threshold ``a``.

    Piecewise: w/a below ``a``, 1 on [a, eta*a/2), 2w/(eta*a) above.
    Continuous in both ``w`` and ``a``; non-increasing in ``a``.
    Accepts scalars or arrays; rejects negative weights.
    """
    if not (a > 0) or not np.isfinite(a):
        raise ValueError(f"threshold a must be positive and finite, got {a}")
    eta = _validate_eta(eta)
    arr = np.asarray(w, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("weights must be nonnegative")
    b = eta * a / 2.0
    out = np.where(arr < a, arr / a, np.where(arr < b, 1.0, arr * (2.0 / (eta * a))))
    if np.ndim(w) == 0:
        return float(out)
    return out


def systematic_counts(values, m: int, u: float) -> np.ndarray:
    """Integer counts from one uniform shifted across a cumulative grid.

    The values are scaled so their cumulative sums C_j span [0, m]; cell j
    receives #{k in 0..m-1 : C_{j-1} <= k+u < C_j} counts. The counts always
    sum to exactly ``m`` and have expectation m*values/sum(values) over
    uniform ``u``.
    """
    m = int(m)
    if m < 0:
        raise ValueError("count target must be >= 0")
    if not (0.0 <= u < 1.0):
        raise ValueError(f"u must lie in [0, 1), got {u}")
    vals = np.asarray(values, dtype=np.float64)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("values must be finite and nonnegative")
    if m == 0:
        return np.zeros(vals.shape, dtype=np.int64)
    total = float(np.sum(vals))
    if not (total > 0):
        raise ValueError("values must have positive sum when counts are requested")
    cum = np.cumsum(vals) * (m / total)
    # rounding guards: keep the grid monotone below m, and never let the last
    # edge lose a count to the subtraction (k + u < m holds for all u < 1)
    np.minimum(cum, m, out=cum)
    edges = np.ceil(cum - u)
    edges[-1] = m
    counts = np.diff(edges, prepend=0.0).astype(np.int64)
    return counts


def solve_a(w, eta: float, n_out: int, rng, *, check: bool = False, stats: dict | None = None) -> float:
    """Threshold a with sum_i h_eval(w_i, a, eta) == n_out, in expected linear time.

    Each round samples a pivot from the longer of two undecided lists (one
    uniform from ``rng`` per round), evaluates the count sum through running
    partial sums, and discards every weight the comparison settles. With
    ``check=True`` the partial-sum bookkeeping is verified against the direct
    sum each round. ``stats``, if given, receives the round count and total
    list traffic.
    """
    eta = _validate_eta(eta)
    n_out = _validate_n_out(n_out)
    w = as_weights(w)
    w_pos = w[w > 0]

    wl = w_pos  # undecided whether below/above the final a
    wu = w_pos  # undecided whether below/above the final eta*a/2
    sl = 0.0  # sum of weights settled below a
    cm = 0  # count settled at or above a
    su = 0.0  # sum settled at or above eta*a/2
    cu = 0  # count settled at or above eta*a/2
    iterations = 0
    traffic = 0

    while wl.size or wu.size:
        iterations += 1
        traffic += wl.size + wu.size
        u = rng.random()
        if wl.size >= wu.size:
            a = float(wl[min(int(u * wl.size), wl.size - 1)])
            b = eta * a / 2.0
        else:
            b = float(wu[min(int(u * wu.size), wu.size - 1)])
            a = 2.0 * b / eta

        # keep the undecided contributions in divide-then-sum form so exact
        # cases (all weights equal) hit the h == n_out early exit precisely
        h = (
            sl / a
            + float(np.sum(np.minimum(wl / a, 1.0)))
            + cm
            + float(np.sum(np.maximum(wu / b - 1.0, 0.0)))
            + su / b
            - cu
        )

        if check:
            direct = float(np.sum(h_eval(w_pos, a, eta)))
            if abs(h - direct) > 1e-9 * max(1.0, abs(direct)):
                raise AssertionError(
                    f"partial-sum bookkeeping drifted: state {h} vs direct {direct}"
                )

        if h == n_out:
            if stats is not None:
                stats["iterations"] = iterations
                stats["traffic"] = traffic
            return a
        if h > n_out:
            # a sits below the solution: everything <= a is settled low,
            # everything <= b carries no excess.
            le_a = wl <= a
            sl += float(np.sum(wl, where=le_a)) if wl.size else 0.0
            wl = wl[~le_a]
            wu = wu[wu > b]
        else:
            # a sits above the solution: everything >= a is settled at count
            # >= 1, everything >= b is settled into the excess terms.
            lt_a = wl < a
            cm += wl.size - int(np.count_nonzero(lt_a))
            wl = wl[lt_a]
            ge_b = wu >= b
            su += float(np.sum(wu, where=ge_b)) if wu.size else 0.0
            cu += int(np.count_nonzero(ge_b))
            wu = wu[~ge_b]

    if stats is not None:
        stats["iterations"] = iterations
        stats["traffic"] = traffic
    num = sl + 2.0 * su / eta
    den = n_out - cm + cu
    if num <= 0.0 or den <= 0:
        # Every weight settled into the flat middle band: any a with all
        # weights in [a, eta*a/2) solves the equation; the smallest weight does.
        return float(np.min(w_pos))
    return num / den


def solve_a_oracle(w, eta: float, n_out: int) -> float:
    """Bisection solution of sum_i h_eval(w_i, a, eta) == n_out.

    Independent of solve_a: brackets the monotone count sum and halves until
    the residual drops below 1e-12 * n_out. Used to cross-check the fast
    solver; on flat stretches the two may return different (equally valid)
    thresholds.
    """
    eta = _validate_eta(eta)
    n_out = _validate_n_out(n_out)
    w = as_weights(w)
    w_pos = w[w > 0]

    lo = float(np.min(w_pos)) * (2.0 / eta) * 1e-6
    hi = float(np.max(w_pos)) * 1e6
    tol = 1e-12 * n_out
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        resid = float(np.sum(h_eval(w_pos, mid, eta))) - n_out
        if abs(resid) <= tol:
            return mid
        if resid > 0:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(
        f"bisection failed to reach residual {tol} (bracket [{lo}, {hi}])"
    )


def chopthin(w, eta: float, n_out: int, rng) -> ResampleResult:
    """Resample to exactly ``n_out`` particles with weight ratio at most ``eta``.

    Conserves the total weight, keeps every output weight in [a, eta*a], and
    leaves the expected total offspring weight of each input particle equal to
    its input weight. ``rng`` only needs a ``random()`` method returning
    uniforms in [0, 1); identical uniform streams give identical output.
    """
    eta = _validate_eta(eta)
    n_out = _validate_n_out(n_out)
    w = as_weights(w)
    a = solve_a(w, eta, n_out, rng)
    return _chop_and_thin(w, eta, n_out, a, rng)


def _chop_and_thin(w: np.ndarray, eta: float, n_out: int, a: float, rng) -> ResampleResult:
    b = eta * a / 2.0
    low = w < a
    idx_low = np.nonzero(low)[0]
    idx_high = np.nonzero(~low)[0]

    # Thin: one uniform walks the cumulative expected counts of the light
    # particles; each integer crossing keeps a particle at weight a.
    u0 = rng.random()
    walk = u0 + np.cumsum(w[idx_low] / a)
    kept = np.diff(np.floor(walk), prepend=0.0) >= 1.0
    thin_anc = idx_low[kept]
    n_low = int(thin_anc.size)

    # Chop: realised counts are floor(h) plus a systematic rounding of the
    # fractional parts, sized so the output is exactly n_out long.
    w_high = w[idx_high]
    h_high = np.maximum(h_eval(w_high, a, eta), 1.0) if w_high.size else w_high
    floors = np.floor(h_high)
    fracs = h_high - floors
    n_chop_extra = n_out - n_low - int(np.sum(floors))
    if n_chop_extra < 0:
        raise RuntimeError("offspring budget went negative; threshold residual too large")
    frac_mass = float(np.sum(fracs))
    if frac_mass > 0.0:
        zeta = (float(np.sum(w[idx_low])) - a * n_low) / frac_mass
        extra = systematic_counts(fracs, n_chop_extra, rng.random())
    else:
        if n_chop_extra != 0:
            raise RuntimeError("no fractional mass left to place remaining offspring")
        zeta = 0.0
        extra = np.zeros(w_high.shape, dtype=np.int64)

    counts = floors.astype(np.int64) + extra
    adjusted = w_high + zeta * fracs
    chop_anc = np.repeat(idx_high, counts)
    chop_w = np.repeat(adjusted / counts, counts)

    ancestors = np.concatenate([thin_anc, chop_anc])
    weights = np.concatenate([np.full(n_low, a), chop_w])
    return ResampleResult(ancestors=ancestors, weights=weights)
