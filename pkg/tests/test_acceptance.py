"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and measured values. Tolerances are fixed here, not calibrated at
runtime. Desk-scale protocol; the full-scale study grids are an opt-in long
profile (see README).
"""

import math
import time

import numpy as np
import pytest
from scipy import stats as sps

from chopthin_smc.chopthin import chopthin, h_eval, solve_a, solve_a_oracle
from chopthin_smc.experiments import (
    ExperimentConfig,
    SchemeSpec,
    ess_trace,
    mse_study,
)
from chopthin_smc.models import LinearGaussianModel, grid_filter, kalman_filter, simulate
from chopthin_smc.particle_filter import PfConfig, pf_run
from chopthin_smc.resamplers import BASELINE_SCHEMES, baseline_resample
from chopthin_smc.weights import ess, ess_lower_bound

ETA_HALF = 3.0 + math.sqrt(8.0)
ETAS = (4.0, ETA_HALF, 10.0)


def _report(name: str, detail: str, elapsed: float, budget: float):
    line = f"[PASS] {name}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)"
    print(line)
    assert elapsed < budget, f"{name} exceeded its runtime budget: {elapsed:.1f}s"


def instances(count=1000, seed=20240):
    """Deterministic random-instance stream for the solver/contract criteria."""
    rng = np.random.default_rng(seed)
    for trial in range(count):
        n = int(rng.integers(1, 201))
        kind = trial % 3
        if kind == 0:
            w = rng.exponential(size=n)
        elif kind == 1:
            w = (1.0 / rng.random(n)) ** (1.0 / 1.5)
        else:
            w = rng.exponential(size=n)
            w[rng.random(n) < 0.3] = 0.0
            if not w.any():
                w[0] = 1.0
        eta = ETAS[trial % 3]
        for n_out in sorted({1, max(1, n // 2), n, 2 * n}):
            yield trial, w, eta, n_out


def test_c1_threshold_solver_correctness():
    start = time.perf_counter()
    worst = 0.0
    calls = 0
    for trial, w, eta, n_out in instances():
        pos = w[w > 0]
        a_fast = solve_a(w, eta, n_out, np.random.default_rng(trial))
        a_ref = solve_a_oracle(w, eta, n_out)
        for a in (a_fast, a_ref):
            resid = abs(float(np.sum(h_eval(pos, a, eta))) - n_out)
            assert resid <= 1e-9 * n_out
            worst = max(worst, resid / n_out)
        calls += 1
    # hand-derived cases
    assert solve_a([1.0, 100.0], 4.0, 2, np.random.default_rng(0)) == pytest.approx(25.5, rel=1e-12)
    assert solve_a([0.1, 0.3, 0.5, 0.9, 1.0], 4.0, 5, np.random.default_rng(0)) == pytest.approx(0.3375, rel=1e-12)
    elapsed = time.perf_counter() - start
    _report(
        "threshold-solver correctness",
        f"{calls} instances, worst residual {worst:.2e} of target; hand cases a=25.5, a=0.3375",
        elapsed,
        10.0,
    )


def test_c2_chopthin_contract_suite():
    start = time.perf_counter()
    calls = 0
    for trial, w, eta, n_out in instances():
        result = chopthin(w, eta, n_out, np.random.default_rng(trial + 1))
        assert result.ancestors.size == n_out
        assert result.weights.sum() == pytest.approx(w.sum(), rel=1e-12)
        assert result.weights.max() / result.weights.min() <= eta * (1 + 1e-12)
        assert ess(result.weights) >= ess_lower_bound(eta, n_out) - 1e-9
        calls += 1
    elapsed = time.perf_counter() - start
    _report(
        "chopthin contract suite",
        f"{calls} resamples: exact count, conserved mass (1e-12 rel), ratio <= eta, ESS >= floor",
        elapsed,
        30.0,
    )


def test_c3_unbiasedness_monte_carlo():
    start = time.perf_counter()
    w = np.arange(1, 11) * 0.1
    n_out = 10
    reps = 100_000

    rng = np.random.default_rng(501)
    totals = np.zeros((reps, 10))
    for r in range(reps):
        anc, wt = chopthin(w, ETA_HALF, n_out, rng)
        np.add.at(totals[r], anc, wt)
    mean_w = totals.mean(axis=0)
    se_w = totals.std(axis=0, ddof=1) / math.sqrt(reps)
    # particles with zero statistical variance (deterministic pass-through)
    # only carry float summation drift; the 1e-9 absolute guard covers them
    random_part = se_w > 1e-9
    z_chop = np.max(np.abs(mean_w - w)[random_part] / se_w[random_part])
    assert np.all(np.abs(mean_w - w) <= 4 * se_w + 1e-9)

    expected = n_out * w / w.sum()
    z_base = {}
    for scheme in BASELINE_SCHEMES:
        rng = np.random.default_rng(502)
        counts = np.zeros((reps, 10))
        for r in range(reps):
            result = baseline_resample(scheme, w, n_out, rng)
            np.add.at(counts[r], result.ancestors, 1.0)
        mean_c = counts.mean(axis=0)
        se_c = counts.std(axis=0, ddof=1) / math.sqrt(reps)
        assert np.all(np.abs(mean_c - expected) <= 4 * se_c + 1e-9), scheme
        ok = se_c > 1e-9
        z_base[scheme] = np.max(np.abs(mean_c - expected)[ok] / se_c[ok])
    elapsed = time.perf_counter() - start
    worst_base = max(z_base, key=z_base.get)
    _report(
        "unbiasedness Monte Carlo",
        f"1e5 reps; chopthin offspring-weight max |z| = {z_chop:.2f}; "
        f"baseline count max |z| = {z_base[worst_base]:.2f} ({worst_base}); all within 4 SE",
        elapsed,
        120.0,
    )


def _effort_rows(args):
    """Run effort-bench through the CLI in a fresh process and parse its CSV.

    Timing in a clean interpreter keeps the measurement independent of the
    allocator state this suite's Monte Carlo tests leave behind (a warm
    small-block arena speeds 1e5-sized calls ~2.5x and skews the ratio).
    """
    import csv as csv_mod
    import io
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "chopthin_smc", "effort-bench", *args],
        capture_output=True,
        text=True,
        check=True,
    )
    return list(csv_mod.DictReader(io.StringIO(proc.stdout)))


def test_c4_linear_effort():
    start = time.perf_counter()
    # raw-time linearity: median over >= 10 runs at 1e5 and 1e6 particles
    rows = _effort_rows(
        ["--n", "100000", "--n", "1000000", "--scheme", "chopthin", "--reps", "11", "--seed", "7"]
    )
    medians = {
        int(r["N"]): float(r["value"]) for r in rows if r["metric"] == "median_seconds"
    }
    ratio = medians[10**6] / medians[10**5]
    assert 7.0 <= ratio <= 14.0, f"t(1e6)/t(1e5) = {ratio:.2f} outside [7, 14]"

    # normalised cost vs systematic at 1e5 (shape-only: absolute normalised
    # constants are environment-specific and NOT asserted)
    rows = _effort_rows(
        ["--n", "100000", "--scheme", "chopthin", "--scheme", "systematic", "--reps", "11", "--seed", "8"]
    )
    cost = {
        r["scheme"]: float(r["value"]) for r in rows if r["metric"] == "normalized_cost"
    }
    assert cost["chopthin"] <= 10.0 * cost["systematic"], cost
    elapsed = time.perf_counter() - start
    _report(
        "linear effort (shape-only)",
        f"t(1e6)/t(1e5) = {ratio:.2f} in [7, 14]; normalized cost chopthin/systematic = "
        f"{cost['chopthin'] / cost['systematic']:.2f}x <= 10x",
        elapsed,
        300.0,
    )


def test_c5_oracle_cross_validation():
    start = time.perf_counter()
    worst_mean = worst_ll = 0.0
    for i, sigma in enumerate([1 / 3, 1.0, 3.0, 9.0] * 5):
        model = LinearGaussianModel(sigma)
        _, obs = simulate(model, 50, np.random.default_rng(900 + i))
        kf = kalman_filter(obs, sigma)
        gf = grid_filter(obs, model)
        worst_mean = max(worst_mean, float(np.max(np.abs(gf.means - kf.means))))
        worst_ll = max(worst_ll, float(np.max(np.abs(gf.loglik - kf.loglik))))
        assert worst_mean < 1e-3 and worst_ll < 1e-3
    # hand cases
    kf = kalman_filter([1.0], 1.0)
    assert kf.means[0] == pytest.approx(2 / 3, rel=1e-12)
    assert kf.loglik[0] == pytest.approx(
        -0.5 * (1 / 3 + math.log(3) + math.log(2 * math.pi)), rel=1e-12
    )
    assert kf.loglik[0] == pytest.approx(-1.6351, abs=1e-3)
    elapsed = time.perf_counter() - start
    _report(
        "oracle cross-validation",
        f"20 datasets (T=50): worst |mean diff| {worst_mean:.1e}, worst |loglik diff| "
        f"{worst_ll:.1e} < 1e-3; Kalman hand cases m=2/3, logp=-1.635",
        elapsed,
        120.0,
    )


def _paired_mse(model, sigmas, workers=2):
    cfg = ExperimentConfig(
        experiment="mse",
        model=model,
        sigma_y=sigmas,
        n_particles=(1000,),
        t_steps=200,
        iterations=200,
        schemes=(SchemeSpec("chopthin", 1.0, eta=ETA_HALF), SchemeSpec("systematic", 0.5)),
        master_seed=60,
        workers=workers,
    )
    return mse_study(cfg)


def test_c6_mse_superiority_desk_scale():
    start = time.perf_counter()
    summary = []
    chop_label = SchemeSpec("chopthin", 1.0, eta=ETA_HALF).label
    sys_label = SchemeSpec("systematic", 0.5).label
    lg = _paired_mse("linear-gaussian", (3.0, 9.0))
    sv = _paired_mse("stoch-vol", (1.0,))
    cells = [(lg, sigma) for sigma in (3.0, 9.0)] + [(sv, None)]
    for report, sigma in cells:
        for metric in ("posterior_mean_mse", "loglik_mse"):
            chop = report.per_iteration[(chop_label, metric, sigma, 1000)]
            syst = report.per_iteration[(sys_label, metric, sigma, 1000)]
            ratio = chop.mean() / syst.mean()
            t_res = sps.ttest_rel(chop, syst, alternative="less")
            model = "stoch-vol" if sigma is None else f"lin-gauss sigma={sigma:g}"
            assert ratio < 1.0, f"{model} {metric}: ratio {ratio:.3f} not < 1"
            assert t_res.pvalue < 0.05, f"{model} {metric}: p={t_res.pvalue:.3g} not < 0.05"
            summary.append(f"{model} {metric.split('_')[0]} ratio {ratio:.2f} (p={t_res.pvalue:.1e})")
    elapsed = time.perf_counter() - start
    _report(
        "MSE superiority at desk scale (paired, one-sided 5%)",
        "; ".join(summary),
        elapsed,
        1800.0,
    )


def test_c7_marginal_likelihood_unbiasedness():
    start = time.perf_counter()
    model = LinearGaussianModel(1.0)
    _, obs = simulate(model, 10, np.random.default_rng(321))
    truth = float(np.exp(np.sum(kalman_filter(obs, 1.0).loglik)))
    reps = 10_000
    cfg = PfConfig(n_particles=100, beta=100, scheme="chopthin", eta=ETA_HALF)
    rng = np.random.default_rng(322)
    estimates = np.empty(reps)
    for r in range(reps):
        estimates[r] = math.exp(pf_run(model, obs, cfg, rng).log_marginal)
    se = estimates.std(ddof=1) / math.sqrt(reps)
    z = (estimates.mean() - truth) / se
    assert abs(estimates.mean() - truth) <= 4 * se
    elapsed = time.perf_counter() - start
    _report(
        "marginal-likelihood unbiasedness probe",
        f"1e4 runs (T=10, N=100, chopthin beta=N): mean/truth = "
        f"{estimates.mean() / truth:.4f}, z = {z:.2f} within 4 SE",
        elapsed,
        300.0,
    )


def test_c8_ess_trace_reproduction():
    start = time.perf_counter()
    n = 10_000
    cfg = ExperimentConfig(
        experiment="ess-trace",
        n_particles=(n,),
        steps=50,
        schemes=(
            SchemeSpec("chopthin", 1.0, eta=ETA_HALF),
            SchemeSpec("chopthin", 1.0, eta=10.0),
            SchemeSpec("systematic", 0.5),
        ),
        master_seed=33,
    )
    report = ess_trace(cfg)
    records = [dict(zip(report.columns, row)) for row in report.rows]
    floors = {ETA_HALF: ess_lower_bound(ETA_HALF, n), 10.0: ess_lower_bound(10.0, n)}
    fired = 0
    for record in records:
        if record["scheme"] == "chopthin":
            assert record["ess_after"] >= floors[record["eta"]] - 1e-9
        else:
            if record["resampled"]:
                fired += 1
                assert record["ess_after"] == pytest.approx(n, rel=1e-12)
    assert fired > 0
    elapsed = time.perf_counter() - start
    _report(
        "ESS-trace reproduction",
        f"chopthin traces stay above floors {floors[ETA_HALF]:.0f} (~0.5N) and "
        f"{floors[10.0]:.0f} (~0.33N); systematic restored full ESS on {fired} fired steps",
        elapsed,
        60.0,
    )
