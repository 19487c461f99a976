"""Command-line front end for resampling, filtering and the experiment drivers.

Exit codes: 0 success, 2 validation error (including malformed input), 3
numerical degeneracy. Every subcommand is deterministic per seed except
effort-bench, whose rows contain wall-clock measurements.
"""

from __future__ import annotations

import math
import os
import sys

import click
import numpy as np

from . import __version__
from .experiments import (
    ExperimentConfig,
    SchemeSpec,
    effort_bench,
    ess_trace,
    mse_study,
)
from .particle_filter import DegeneracyError, PfConfig, pf_run
from .models import make_model
from .resamplers import SCHEMES, resample

ETA_HALF_ESS = 3.0 + math.sqrt(8.0)  # ratio bound whose large-N ESS floor is N/2


class _Degeneracy(click.ClickException):
    exit_code = 3


def _read_weights(stream) -> list[float]:
    """Parse weights from plain text or CSV: one or more numbers per line,
    blank lines ignored, scientific notation fine."""
    weights: list[float] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        for token in line.split(","):
            token = token.strip()
            if not token:
                continue
            try:
                weights.append(float(token))
            except ValueError:
                raise click.UsageError(f"malformed weight on line {lineno}: {token!r}")
    if not weights:
        raise click.UsageError("no weights found in input")
    return weights


def _read_numbers(stream, what: str) -> list[float]:
    values: list[float] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise click.UsageError(f"malformed {what} on line {lineno}: {line!r}")
    if not values:
        raise click.UsageError(f"no {what}s found in input")
    return values


def _out_stream(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", newline="")


def _in_stream(path: str):
    if path == "-":
        return sys.stdin
    return open(path, "r")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _env_header() -> dict:
    return {
        "env_CHOPTHIN_SEED": os.environ.get("CHOPTHIN_SEED"),
        "env_CHOPTHIN_WORKERS": os.environ.get("CHOPTHIN_WORKERS"),
    }


def _parse_rows(rows: tuple[str, ...]) -> tuple[SchemeSpec, ...]:
    """Parse scheme rows of the form scheme:beta_fraction[:eta]."""
    specs = []
    for raw in rows:
        parts = raw.split(":")
        if len(parts) not in (2, 3):
            raise click.UsageError(
                f"bad scheme row {raw!r}; expected scheme:beta_fraction[:eta]"
            )
        try:
            beta_fraction = float(parts[1])
            eta = float(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise click.UsageError(f"bad number in scheme row {raw!r}")
        try:
            specs.append(SchemeSpec(parts[0], beta_fraction, eta))
        except ValueError as exc:
            raise click.UsageError(str(exc))
    return tuple(specs)


def _emit_report(report, output: str, json_output: str | None) -> None:
    stream = _out_stream(output)
    try:
        stream.write(report.csv_text())
    finally:
        if stream is not sys.stdout:
            stream.close()
    if json_output:
        report.to_json(json_output)


@click.group()
@click.version_option(version=__version__)
def main():
    """Bounded weight-ratio resampling, particle filtering and benchmarks."""


@main.command("resample")
@click.option("--scheme", type=click.Choice(SCHEMES), required=True)
@click.option("--eta", type=float, default=None, help="Weight-ratio bound (chopthin only, >= 4).")
@click.option("--n-out", type=int, required=True, help="Number of offspring particles.")
@click.option("--seed", type=int, default=0, envvar="CHOPTHIN_SEED", show_default=True)
@click.option("--input", "input_path", default="-", help="Weights file, '-' for stdin.")
@click.option("--output", "output_path", default="-", help="CSV destination, '-' for stdout.")
def resample_cmd(scheme, eta, n_out, seed, input_path, output_path):
    """Resample weights read from input (one per line or CSV; blank lines
    ignored).

    Emits CSV `ancestor,weight` with 1-based ancestor indices; weights are
    printed with full round-trip precision.
    """
    stream = _in_stream(input_path)
    try:
        weights = _read_weights(stream)
    finally:
        if stream is not sys.stdin:
            stream.close()
    rng = np.random.default_rng(seed)
    try:
        result = resample(scheme, weights, n_out, rng, eta=eta)
    except DegeneracyError as exc:
        raise _Degeneracy(str(exc))
    except ValueError as exc:
        raise click.UsageError(str(exc))
    out = _out_stream(output_path)
    try:
        out.write("ancestor,weight\n")
        for anc, wt in zip(result.ancestors, result.weights):
            out.write(f"{int(anc) + 1},{_fmt(float(wt))}\n")
    finally:
        if out is not sys.stdout:
            out.close()


@main.command("pf-run")
@click.option("--model", type=click.Choice(["linear-gaussian", "stoch-vol"]), default="linear-gaussian", show_default=True)
@click.option("--sigma-y", type=float, default=1.0, show_default=True, help="Observation noise sd (linear-gaussian).")
@click.option("--n", "n_particles", type=int, default=1000, show_default=True)
@click.option("--beta-fraction", type=float, default=0.5, show_default=True, help="ESS trigger as a fraction of N.")
@click.option("--scheme", type=click.Choice(SCHEMES), default="systematic", show_default=True)
@click.option("--eta", type=float, default=None)
@click.option("--seed", type=int, default=0, envvar="CHOPTHIN_SEED", show_default=True)
@click.option("--input", "input_path", default="-", help="Observations, one per line; '-' for stdin.")
@click.option("--output", "output_path", default="-")
def pf_run_cmd(model, sigma_y, n_particles, beta_fraction, scheme, eta, seed, input_path, output_path):
    """Run the bootstrap particle filter on observations.

    Emits CSV `t,posterior_mean,cond_lik,ess_before,ess_after,resampled,n_particles`.
    """
    stream = _in_stream(input_path)
    try:
        obs = _read_numbers(stream, "observation")
    finally:
        if stream is not sys.stdin:
            stream.close()
    try:
        cfg = PfConfig(
            n_particles=n_particles,
            beta=beta_fraction * n_particles,
            scheme=scheme,
            eta=eta,
            seed=seed,
        )
        model_obj = make_model(model, sigma_y if model == "linear-gaussian" else None)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    try:
        out = pf_run(model_obj, obs, cfg)
    except DegeneracyError as exc:
        raise _Degeneracy(str(exc))
    stream = _out_stream(output_path)
    try:
        stream.write("t,posterior_mean,cond_lik,ess_before,ess_after,resampled,n_particles\n")
        for t in range(len(obs)):
            stream.write(
                ",".join(
                    [
                        str(t + 1),
                        _fmt(float(out.posterior_means[t])),
                        _fmt(float(out.cond_lik[t])),
                        _fmt(float(out.ess_before[t])),
                        _fmt(float(out.ess_after[t])),
                        _fmt(bool(out.resampled[t])),
                        str(int(out.n_particles[t])),
                    ]
                )
                + "\n"
            )
    finally:
        if stream is not sys.stdout:
            stream.close()


@main.command("mse-study")
@click.option("--model", type=click.Choice(["linear-gaussian", "stoch-vol"]), default="linear-gaussian", show_default=True)
@click.option("--sigma-y", type=float, multiple=True, default=(1.0,), show_default=True)
@click.option("--n", "n_particles", type=int, multiple=True, default=(100, 1000), show_default=True)
@click.option("--t-steps", type=int, default=200, show_default=True)
@click.option("--iterations", "-M", type=int, default=100, show_default=True)
@click.option("--row", "rows", multiple=True, help="Scheme row scheme:beta_fraction[:eta]; repeatable. Default: chopthin:1:<eta for N/2 floor> and systematic:0.5.")
@click.option("--seed", type=int, default=0, envvar="CHOPTHIN_SEED", show_default=True)
@click.option("--workers", type=int, default=1, envvar="CHOPTHIN_WORKERS", show_default=True)
@click.option("--output", "output_path", default="-")
@click.option("--json-output", default=None, help="Also write a JSON report here.")
def mse_study_cmd(model, sigma_y, n_particles, t_steps, iterations, rows, seed, workers, output_path, json_output):
    """Paired MSE study of filter accuracy against the exact/grid oracle.

    Emits CSV `experiment,model,sigma_y,N,T,M,scheme,beta,eta,metric,value,stderr,ratio_to_systematic`
    with metrics posterior_mean_mse and loglik_mse per scheme row.
    """
    schemes = _parse_rows(rows) if rows else (
        SchemeSpec("chopthin", 1.0, eta=ETA_HALF_ESS),
        SchemeSpec("systematic", 0.5),
    )
    try:
        cfg = ExperimentConfig(
            experiment="mse",
            model=model,
            sigma_y=tuple(sigma_y),
            n_particles=tuple(n_particles),
            t_steps=t_steps,
            iterations=iterations,
            schemes=schemes,
            master_seed=seed,
            workers=workers,
        )
        report = mse_study(cfg, extra_header=_env_header())
    except ValueError as exc:
        raise click.UsageError(str(exc))
    except DegeneracyError as exc:
        raise _Degeneracy(str(exc))
    _emit_report(report, output_path, json_output)


@main.command("effort-bench")
@click.option("--n", "n_particles", type=int, multiple=True, default=(1000, 10000), show_default=True)
@click.option("--scheme", "scheme_names", multiple=True, default=("chopthin", "systematic", "multinomial", "multinomial-condbinom"), show_default=True)
@click.option("--eta", type=float, default=ETA_HALF_ESS, show_default=True, help="Ratio bound used for chopthin rows.")
@click.option("--reps", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, envvar="CHOPTHIN_SEED", show_default=True)
@click.option("--output", "output_path", default="-")
@click.option("--json-output", default=None)
def effort_bench_cmd(n_particles, scheme_names, eta, reps, seed, output_path, json_output):
    """Time resamplers on Exp(1) weights, normalised by exponential generation.

    Emits the same CSV schema as mse-study with metrics normalized_cost and
    median_seconds. Values are wall-clock medians, so output bytes vary from
    run to run even with a fixed seed.
    """
    try:
        schemes = tuple(
            SchemeSpec(name, 1.0, eta=eta if name == "chopthin" else None)
            for name in scheme_names
        )
        cfg = ExperimentConfig(
            experiment="effort",
            n_particles=tuple(n_particles),
            iterations=reps,
            schemes=schemes,
            master_seed=seed,
        )
        report = effort_bench(cfg, extra_header=_env_header())
    except ValueError as exc:
        raise click.UsageError(str(exc))
    _emit_report(report, output_path, json_output)


@main.command("ess-trace")
@click.option("--model", type=click.Choice(["linear-gaussian", "stoch-vol"]), default="linear-gaussian", show_default=True)
@click.option("--sigma-y", type=float, default=1.0, show_default=True)
@click.option("--scheme", type=click.Choice(SCHEMES), default="chopthin", show_default=True)
@click.option("--beta-fraction", type=float, default=1.0, show_default=True)
@click.option("--eta", type=float, default=None, help="Required for chopthin.")
@click.option("--n", "n_particles", type=int, default=1000, show_default=True)
@click.option("--steps", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, envvar="CHOPTHIN_SEED", show_default=True)
@click.option("--output", "output_path", default="-")
@click.option("--json-output", default=None)
def ess_trace_cmd(model, sigma_y, scheme, beta_fraction, eta, n_particles, steps, seed, output_path, json_output):
    """Trace the ESS before/after resampling over the first steps of one run.

    Emits CSV `t,scheme,beta,eta,ess_before,ess_after,resampled`.
    """
    try:
        cfg = ExperimentConfig(
            experiment="ess-trace",
            model=model,
            sigma_y=(sigma_y,),
            n_particles=(n_particles,),
            t_steps=steps,
            schemes=(SchemeSpec(scheme, beta_fraction, eta),),
            master_seed=seed,
            steps=steps,
        )
        report = ess_trace(cfg, extra_header=_env_header())
    except ValueError as exc:
        raise click.UsageError(str(exc))
    except DegeneracyError as exc:
        raise _Degeneracy(str(exc))
    _emit_report(report, output_path, json_output)


if __name__ == "__main__":
    main()
