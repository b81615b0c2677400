"""Command-line front end: simulate, fit, conformal, evaluate, replicate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
All randomness flows from ``--seed``, so repeating an invocation with the
same flags reproduces its outputs byte for byte.
"""

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import fileio
from .conformal import calibrate as conformal_calibrate
from .conformal import empirical_coverage, predict_region
from .errors import CalibrationError, DataError, NumericalError
from .experiments import (
    CoverageSettings,
    EstimationSettings,
    aggregate_study,
    run_coverage_study,
    run_estimation_study,
)
from .features import build_design, pooled_training_basis
from .metrics import beta_l2_loss, make_report, pooled_quantile_window
from .simulate import ScenarioA1Config, gen_scenario_a1, gen_scenario_a2, split_train_test
from .solver import McpSpec, fit as solver_fit
from .tuning import TuningGrid, cross_validate

_DEFAULT_CV_COUNTS = (5, 6, 8, 10)


@click.group()
def cli():
    """Regression on multidimensional distributional predictors.

    Subjects are observed through draws from a latent multivariate
    distribution; outcomes are modeled through tensor-spline features of
    those draws plus scalar covariates, with conformal hypercube
    prediction regions on top.
    """


@cli.command()
@click.option("--scenario", type=click.Choice(["a1", "a2"]), required=True,
              help="a1: estimation benchmark (train/test); a2: coverage benchmark "
                   "(train1/train2/calibration/test).")
@click.option("--n", type=int, required=True, help="Number of subjects.")
@click.option("--m", type=int, default=1000, show_default=True, help="Draws per subject.")
@click.option("--seed", type=int, required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--alpha", type=float, default=0.05, show_default=True,
              help="Recorded in the sidecar for the a2 pipeline.")
def simulate(scenario, n, m, seed, out_dir, alpha):
    """Generate a synthetic benchmark dataset plus a ground-truth sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ScenarioA1Config(n=n, m=m, seed=seed)

    if scenario == "a1":
        dataset, truth = gen_scenario_a1(cfg)
        train, test = split_train_test(dataset, cfg.train_fraction, cfg.seed)
        parts = {"train": train, "test": test}
    else:
        train1, train2, calib, test, truth = gen_scenario_a2(cfg)
        parts = {"train1": train1, "train2": train2, "calibration": calib, "test": test}

    roles = {}
    for name, part in parts.items():
        fileio.write_dataset(part, out / f"{name}_covariates.csv", out / f"{name}_draws.csv")
        for sid in part.ids:
            roles[sid] = name
    config = {"scenario": scenario, "n": n, "m": m, "seed": seed, "alpha": alpha,
              "train_fraction": cfg.train_fraction}
    fileio.save_truth(out / "truth.json", truth, roles, config)
    sizes = ", ".join(f"{name}={len(part)}" for name, part in parts.items())
    click.echo(f"wrote {scenario} data to {out} ({sizes})")


def _parse_basis(text: str, d: int):
    if text.strip().lower() == "cv":
        return None
    try:
        counts = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise click.UsageError(f"--basis must be 'cv' or comma-separated integers, got {text!r}")
    if len(counts) != d:
        raise click.UsageError(f"--basis needs {d} counts for {d} draw dimensions, got {text!r}")
    return counts


def _parse_lambda(text: str):
    if text.strip().lower() == "path":
        return None
    try:
        value = float(text)
    except ValueError:
        raise click.UsageError(f"--lambda must be 'path' or a number, got {text!r}")
    if value < 0:
        raise click.UsageError("--lambda must be nonnegative")
    return value


@cli.command(name="fit")
@click.option("--covariates", "covariates_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--draws", "draws_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--basis", default="cv", show_default=True,
              help="Per-dimension basis counts 'nU,nV[,nW]' or 'cv' for cross-validation.")
@click.option("--lambda", "lam", default="path", show_default=True,
              help="Penalty level, or 'path' to cross-validate over a log-spaced path.")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--phi", type=float, default=3.0, show_default=True,
              help="Concavity of the group penalty.")
@click.option("--n-lambda", type=int, default=100, show_default=True)
@click.option("--min-ratio", type=float, default=1e-3, show_default=True)
@click.option("--degree", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--model-out", type=click.Path(dir_okay=False), required=True)
def fit_command(covariates_path, draws_path, basis, lam, folds, phi,
                n_lambda, min_ratio, degree, seed, model_out):
    """Fit the penalized distributional regression, optionally tuning by CV."""
    train = fileio.read_dataset(covariates_path, draws_path)
    d = train.dims.n_draw_dims
    counts = _parse_basis(basis, d)
    lam_value = _parse_lambda(lam)
    window = pooled_quantile_window(train)

    if counts is not None and lam_value is not None:
        tb = pooled_training_basis(train, counts, degree)
        blocks = build_design(train, tb)
        spec = McpSpec(lam=lam_value, phi=phi)
        result = solver_fit(blocks, spec, basis=tb)
        chosen_basis, chosen_lambda = counts, lam_value
        cv_table = None
    else:
        grid = TuningGrid(
            basis_counts=(
                tuple((c,) * d for c in _DEFAULT_CV_COUNTS) if counts is None else (counts,)
            ),
            n_lambda=n_lambda,
            min_ratio=min_ratio,
            folds=folds,
            seed=seed,
            degree=degree,
            lambdas=None if lam_value is None else (lam_value,),
        )
        tuned = cross_validate(train, grid, phi=phi)
        result = tuned.refit
        chosen_basis, chosen_lambda = tuned.best_basis, tuned.best_lambda
        cv_table = tuned.cv_table
        spec = McpSpec(lam=chosen_lambda, phi=phi)

    fileio.save_model(model_out, result, spec, train.dims, surface_window=window)
    if cv_table is not None:
        cv_path = Path(str(model_out) + ".cv.csv")
        cv_table.to_csv(cv_path, index=False)
        click.echo(f"cross-validation table written to {cv_path}")
    click.echo(
        f"selected basis {'x'.join(str(c) for c in chosen_basis)}, "
        f"lambda {chosen_lambda:.6g}, active groups {len(result.active_groups)}"
    )
    click.echo(f"model written to {model_out}")


@cli.group()
def conformal():
    """Calibrate prediction regions and predict with them."""


@conformal.command(name="calibrate")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--train2", "train2_arg", required=True,
              help="Dataset for modulation scales: a directory with covariates.csv/draws.csv "
                   "or a file prefix (<prefix>_covariates.csv, <prefix>_draws.csv).")
@click.option("--calibration", "calibration_arg", required=True,
              help="Dataset for nonconformity scores (same path convention).")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--uncorrected-quantile", is_flag=True,
              help="Use the plain empirical quantile instead of the finite-sample-"
                   "corrected order statistic.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Output model path; defaults to augmenting --model in place.")
def conformal_calibrate_command(model_path, train2_arg, calibration_arg, alpha,
                                uncorrected_quantile, out_path):
    """Augment a fitted model with conformal calibration."""
    fit_result, spec, dims, _, window = fileio.load_model(model_path)
    train2 = fileio.read_dataset(*fileio.resolve_dataset_arg(train2_arg))
    calib = fileio.read_dataset(*fileio.resolve_dataset_arg(calibration_arg))
    cm = conformal_calibrate(
        fit_result, train2, calib, alpha,
        finite_sample_correction=not uncorrected_quantile,
    )
    target = out_path or model_path
    fileio.save_model(target, fit_result, spec, dims, conformal=cm, surface_window=window)
    q_text = "inf" if not np.isfinite(cm.q_hat) else f"{cm.q_hat:.6g}"
    click.echo(f"calibrated on {cm.n_cal} subjects at alpha={alpha}: q_hat={q_text}")
    click.echo(f"model written to {target}")


@conformal.command(name="predict")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--input", "input_arg", required=True,
              help="Dataset to predict: directory or file prefix (see calibrate).")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def conformal_predict_command(model_path, input_arg, out_path):
    """Write per-subject prediction intervals (center, lo, hi per outcome)."""
    _, _, dims, cm, _ = fileio.load_model(model_path)
    if cm is None:
        raise DataError(f"{model_path}: model has no conformal calibration")
    data = fileio.read_dataset(*fileio.resolve_dataset_arg(input_arg))

    header = ["subject_id"]
    for k in range(dims.n_outcomes):
        header += [f"center_{k + 1}", f"lo_{k + 1}", f"hi_{k + 1}"]
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for subject in data.subjects:
            region = predict_region(cm, subject.x, subject.z_samples)
            row = [subject.id]
            for k in range(dims.n_outcomes):
                row += [
                    repr(float(region.center[k])),
                    repr(float(region.center[k] - region.half_width[k])),
                    repr(float(region.center[k] + region.half_width[k])),
                ]
            writer.writerow(row)
    click.echo(f"intervals for {len(data)} subjects written to {out_path}")


@cli.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--test-covariates", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--test-draws", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Ground-truth sidecar enabling the surface loss.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), required=True)
def evaluate(model_path, test_covariates, test_draws, truth_path, report_path):
    """Score a model on a test set; writes a JSON report."""
    fit_result, _, _, cm, window = fileio.load_model(model_path)
    test = fileio.read_dataset(test_covariates, test_draws)
    predictions = fit_result.predict_dataset(test)

    surface_loss = None
    if truth_path is not None:
        truth, _, _ = fileio.load_truth(truth_path)
        if window is None:
            click.echo("warning: model lacks a stored evaluation window; "
                       "surface loss omitted", err=True)
        else:
            surface_loss = beta_l2_loss(fit_result, truth, window)
    else:
        click.echo("warning: no --truth sidecar given; surface loss omitted", err=True)

    coverage = empirical_coverage(cm, test) if cm is not None else None
    report = make_report(test, predictions, surface_loss=surface_loss, coverage=coverage)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=1)
        fh.write("\n")
    r2_text = ", ".join(f"{v:.4f}" for v in report.r2)
    click.echo(f"r2 per outcome: {r2_text}")
    if coverage is not None:
        click.echo(f"conformal coverage: {coverage:.4f}")
    click.echo(f"report written to {report_path}")


@cli.command()
@click.option("--scenario", type=click.Choice(["a1", "a2"]), required=True)
@click.option("--reps", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Base seed; replication r uses seed + r.")
@click.option("--n", type=int, required=True)
@click.option("--m", type=int, default=None,
              help="Draws per subject (defaults: 100 for a1, 200 for a2).")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--basis", default=None,
              help="Fixed per-dimension basis counts, e.g. '7,7' (defaults per scenario).")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--n-lambda", type=int, default=None)
@click.option("--min-ratio", type=float, default=1e-3, show_default=True)
@click.option("--phi", type=float, default=3.0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
def replicate(scenario, reps, seed, n, m, alpha, basis, folds, n_lambda,
              min_ratio, phi, jobs, out_dir):
    """Run Monte-Carlo replications and write per-rep plus aggregate CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = None if basis is None else _parse_basis(basis, 2)
    if counts is None:
        counts = (7, 7) if scenario == "a1" else (6, 6)

    if scenario == "a1":
        settings = EstimationSettings(
            n=n, m=m or 100, seed=seed, basis_counts=(counts,), folds=folds,
            n_lambda=n_lambda or 25, min_ratio=min_ratio, phi=phi,
        )
        frame = run_estimation_study(settings, reps, jobs=jobs)
    else:
        settings = CoverageSettings(
            n=n, m=m or 200, seed=seed, alpha=alpha, basis_counts=(counts,),
            folds=folds, n_lambda=n_lambda or 15, min_ratio=min_ratio, phi=phi,
        )
        frame = run_coverage_study(settings, reps, jobs=jobs)

    frame.to_csv(out / "replications.csv", index=False)
    agg = aggregate_study(frame)
    agg.to_csv(out / "aggregate.csv", index=False)
    click.echo(f"{reps} replications written to {out / 'replications.csv'}")
    for _, row in agg.iterrows():
        click.echo(f"  {row['metric']}: mean={row['mean']:.4f} median={row['median']:.4f} "
                   f"sd={row['sd']:.4f}")


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:  # --help and friends
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except (NumericalError, CalibrationError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
