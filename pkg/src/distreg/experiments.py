"""Monte-Carlo replication drivers for the two synthetic benchmarks.

Each replication is driven entirely by its own seed, so replications can
run in any order (or concurrently) and still produce identical rows; the
drivers always emit rows ordered by replication index.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .baselines import QuantileGrid, fit_mean_summary, fit_soqfr_cv
from .conformal import ConstantModel, calibrate, empirical_coverage
from .metrics import beta_l2_loss, pooled_quantile_window, r_squared
from .simulate import ScenarioA1Config, gen_scenario_a1, gen_scenario_a2, split_train_test
from .tuning import TuningGrid, cross_validate


@dataclass(frozen=True)
class EstimationSettings:
    """Configuration for one estimation-benchmark replication."""

    n: int
    m: int = 100
    seed: int = 0
    basis_counts: tuple[tuple[int, ...], ...] = ((7, 7),)
    folds: int = 5
    n_lambda: int = 12
    min_ratio: float = 0.01
    phi: float = 3.0
    include_baselines: bool = True
    soqfr_basis_sizes: tuple[int, ...] = (5, 8, 12)
    grid_size: int = 50


def run_estimation_replication(settings: EstimationSettings) -> dict:
    """Fit on the training split, score R^2 and surface loss on the rest."""
    cfg = ScenarioA1Config(n=settings.n, m=settings.m, seed=settings.seed)
    dataset, truth = gen_scenario_a1(cfg)
    train, test = split_train_test(dataset, cfg.train_fraction, cfg.seed)

    grid = TuningGrid(
        basis_counts=settings.basis_counts,
        n_lambda=settings.n_lambda,
        min_ratio=settings.min_ratio,
        folds=settings.folds,
        seed=settings.seed,
    )
    tuned = cross_validate(train, grid, phi=settings.phi)
    fit = tuned.refit

    y_test = test.outcome_matrix()
    r2 = r_squared(y_test, fit.predict_dataset(test))
    window = pooled_quantile_window(train)
    losses = beta_l2_loss(fit, truth, window, settings.grid_size)

    row = {
        "seed": settings.seed,
        "n": settings.n,
        "m": settings.m,
        "lambda": tuned.best_lambda,
        "basis": "x".join(str(c) for c in tuned.best_basis),
        "active_groups": len(fit.active_groups),
    }
    for k in range(r2.size):
        row[f"r2_{k + 1}"] = float(r2[k])
        row[f"l2_{k + 1}"] = float(losses[k])

    if settings.include_baselines:
        mean_model = fit_mean_summary(train)
        r2_mean = r_squared(y_test, mean_model.predict_dataset(test))
        soqfr = fit_soqfr_cv(
            train,
            QuantileGrid.default(),
            basis_sizes=settings.soqfr_basis_sizes,
            folds=settings.folds,
            seed=settings.seed,
            n_lambda=settings.n_lambda,
            min_ratio=settings.min_ratio,
            phi=settings.phi,
        )
        r2_soqfr = r_squared(y_test, soqfr.predict_dataset(test))
        for k in range(r2.size):
            row[f"r2_mean_{k + 1}"] = float(r2_mean[k])
            row[f"r2_soqfr_{k + 1}"] = float(r2_soqfr[k])
    return row


@dataclass(frozen=True)
class CoverageSettings:
    """Configuration for one coverage-benchmark replication."""

    n: int
    m: int = 200
    seed: int = 0
    alpha: float = 0.05
    basis_counts: tuple[tuple[int, ...], ...] = ((6, 6),)
    folds: int = 5
    n_lambda: int = 8
    min_ratio: float = 0.05
    phi: float = 3.0


def run_coverage_replication(settings: CoverageSettings) -> dict:
    """Train, calibrate, and measure region coverage on held-out subjects.

    Also calibrates a constant predictor on the same splits: the coverage
    guarantee is model-agnostic, so its coverage must hold as well.
    """
    cfg = ScenarioA1Config(n=settings.n, m=settings.m, seed=settings.seed)
    train1, train2, calib, test, _ = gen_scenario_a2(cfg)

    grid = TuningGrid(
        basis_counts=settings.basis_counts,
        n_lambda=settings.n_lambda,
        min_ratio=settings.min_ratio,
        folds=settings.folds,
        seed=settings.seed,
    )
    tuned = cross_validate(train1, grid, phi=settings.phi)
    fit = tuned.refit

    cm = calibrate(fit, train2, calib, settings.alpha)
    coverage = empirical_coverage(cm, test)

    constant = ConstantModel(train1.outcome_matrix().mean(axis=0))
    cm_const = calibrate(constant, train2, calib, settings.alpha)
    coverage_const = empirical_coverage(cm_const, test)

    return {
        "seed": settings.seed,
        "n": settings.n,
        "m": settings.m,
        "alpha": settings.alpha,
        "lambda": tuned.best_lambda,
        "coverage": coverage,
        "coverage_constant": coverage_const,
        "q_hat": cm.q_hat,
        "mean_half_width": float(np.mean(cm.q_hat * cm.s)) if np.isfinite(cm.q_hat) else np.inf,
    }


def _estimation_worker(args):
    settings, rep = args
    row = run_estimation_replication(replace(settings, seed=settings.seed + rep))
    row["rep"] = rep
    return row


def _coverage_worker(args):
    settings, rep = args
    row = run_coverage_replication(replace(settings, seed=settings.seed + rep))
    row["rep"] = rep
    return row


def _run_many(worker, settings, reps: int, jobs: int) -> pd.DataFrame:
    tasks = [(settings, rep) for rep in range(reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(worker, tasks))
    else:
        rows = [worker(t) for t in tasks]
    rows.sort(key=lambda r: r["rep"])
    frame = pd.DataFrame(rows)
    lead = ["rep", "seed", "n"]
    return frame[lead + [c for c in frame.columns if c not in lead]]


def run_estimation_study(settings: EstimationSettings, reps: int, jobs: int = 1) -> pd.DataFrame:
    """Replicate the estimation benchmark; per-replication rows, ordered by index."""
    return _run_many(_estimation_worker, settings, reps, jobs)


def run_coverage_study(settings: CoverageSettings, reps: int, jobs: int = 1) -> pd.DataFrame:
    """Replicate the coverage benchmark; per-replication rows, ordered by index."""
    return _run_many(_coverage_worker, settings, reps, jobs)


def aggregate_study(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean / median / standard deviation per numeric metric column."""
    skip = {"rep", "seed", "n", "m", "alpha"}
    metrics = [
        c for c in frame.columns
        if c not in skip and pd.api.types.is_numeric_dtype(frame[c])
    ]
    out = pd.DataFrame({
        "metric": metrics,
        "mean": [frame[c].mean() for c in metrics],
        "median": [frame[c].median() for c in metrics],
        "sd": [frame[c].std(ddof=1) for c in metrics],
    })
    return out
