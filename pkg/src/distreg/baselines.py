"""Comparison models: mean-summary regression and quantile-function regression.

Both baselines replace the tensor distributional features with simpler
subject summaries but keep the rest of the pipeline identical, so any
performance difference reflects the representation, not the optimizer:
the quantile-function model is fitted with the same multi-task
group-penalized solver and fold machinery as the main model.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .bspline import BSplineBasis, eval_basis_batch, make_basis
from .core import Dataset, SubjectRecord
from .errors import DataError
from .features import standardize_design
from .solver import FitResult, McpSpec, fit, lambda_path
from .tuning import fold_assignment


def quantile_function(samples, levels) -> np.ndarray:
    """Empirical quantiles at the given levels, by linear interpolation
    of order statistics (numpy's default convention); nondecreasing."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise DataError("cannot take quantiles of an empty sample")
    return np.quantile(s, np.asarray(levels, dtype=float))


def default_levels(count: int = 101) -> np.ndarray:
    """``count`` equally spaced interior probability levels j / (count + 1)."""
    return np.arange(1, count + 1) / (count + 1)


@dataclass(frozen=True)
class QuantileGrid:
    """Probability levels at which subject quantile functions are read off."""

    levels: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float)
        if levels.ndim != 1 or levels.size < 2:
            raise DataError("quantile grid needs at least two levels")
        if np.any(levels <= 0) or np.any(levels >= 1):
            raise DataError("levels must lie strictly inside (0, 1)")
        if np.any(np.diff(levels) <= 0):
            raise DataError("levels must be strictly increasing")
        levels.flags.writeable = False
        object.__setattr__(self, "levels", levels)

    @classmethod
    def default(cls) -> "QuantileGrid":
        return cls(default_levels())


def subject_quantiles(dataset: Dataset, grid: QuantileGrid) -> np.ndarray:
    """Per-subject, per-dimension quantile values; returns (n, d, len(levels)).

    Subjects sharing a draw count are batched into one vectorized
    quantile call; values match per-subject evaluation exactly.
    """
    d = dataset.dims.n_draw_dims
    out = np.empty((len(dataset), d, grid.levels.size))
    by_count: dict[int, list[int]] = {}
    for i, subject in enumerate(dataset.subjects):
        by_count.setdefault(subject.n_draws, []).append(i)
    for idx in by_count.values():
        stacked = np.stack([dataset.subjects[i].z_samples for i in idx])  # (g, m, d)
        q = np.quantile(stacked, grid.levels, axis=1)  # (levels, g, d)
        out[idx] = np.moveaxis(q, 0, 2)
    return out


@dataclass(frozen=True)
class MeanSummaryModel:
    """Per-outcome OLS on [1, covariates, per-subject draw means]."""

    coef: np.ndarray  # (1 + q + d, K)

    def _design(self, dataset: Dataset) -> np.ndarray:
        means = np.array([s.z_samples.mean(axis=0) for s in dataset.subjects])
        return np.hstack([np.ones((len(dataset), 1)), dataset.covariate_matrix(), means])

    def predict(self, x, z_samples) -> np.ndarray:
        row = np.concatenate([[1.0], np.asarray(x, dtype=float).ravel(),
                              np.asarray(z_samples, dtype=float).mean(axis=0)])
        return row @ self.coef

    def predict_dataset(self, dataset: Dataset) -> np.ndarray:
        return self._design(dataset) @ self.coef


def fit_mean_summary(train: Dataset) -> MeanSummaryModel:
    """Fit the mean-summary baseline by ordinary least squares."""
    model = MeanSummaryModel(coef=np.zeros((1, 1)))
    design = model._design(train)
    coef, _, rank, sv = np.linalg.lstsq(design, train.outcome_matrix(), rcond=None)
    if rank < design.shape[1]:
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        raise DataError(
            f"mean-summary design is singular (rank {rank} < {design.shape[1]}, "
            f"condition number {cond:.3e})"
        )
    return MeanSummaryModel(coef=coef)


@dataclass(frozen=True)
class SoqfrModel:
    """Scalar-on-quantile-function fit: shared-basis functional-linear terms.

    Per dimension, the feature vector is the Riemann average of the
    quantile function against each basis function on (0, 1); the stacked
    features are fitted with the multi-task group-penalized solver.
    """

    fit: FitResult
    grid: QuantileGrid
    basis: BSplineBasis

    def _features(self, dataset: Dataset) -> np.ndarray:
        q = subject_quantiles(dataset, self.grid)
        b = eval_basis_batch(self.basis, self.grid.levels)  # (G, nb)
        # (n, d, G) x (G, nb) -> (n, d, nb), averaged over the level grid
        feats = q @ b / self.grid.levels.size
        return feats.reshape(len(dataset), -1)

    def predict_dataset(self, dataset: Dataset) -> np.ndarray:
        feats = self._features(dataset)
        x = dataset.covariate_matrix()
        return self.fit.intercept + x @ self.fit.gamma + feats @ self.fit.theta

    def predict(self, x, z_samples) -> np.ndarray:
        one = Dataset.from_subjects(
            [SubjectRecord(id="_", y=np.zeros(self.fit.n_outcomes), x=x, z_samples=z_samples)]
        )
        return self.predict_dataset(one)[0]


def soqfr_features(dataset: Dataset, grid: QuantileGrid, basis: BSplineBasis) -> np.ndarray:
    """Quantile-function features: (n, d * n_basis), dimensions stacked in order."""
    q = subject_quantiles(dataset, grid)
    b = eval_basis_batch(basis, grid.levels)
    return (q @ b / grid.levels.size).reshape(len(dataset), -1)


def fit_soqfr(
    train: Dataset,
    grid: QuantileGrid,
    n_basis: int,
    spec: McpSpec,
    degree: int = 3,
    tol: float = 1e-7,
    max_iter: int = 10_000,
) -> SoqfrModel:
    """Fit the quantile-function baseline at a fixed basis size and penalty."""
    basis = make_basis(grid.levels, n_basis, degree)
    feats = soqfr_features(train, grid, basis)
    blocks = standardize_design(train.outcome_matrix(), train.covariate_matrix(), feats)
    res = fit(blocks, spec, tol=tol, max_iter=max_iter)
    return SoqfrModel(fit=res, grid=grid, basis=basis)


def fit_soqfr_cv(
    train: Dataset,
    grid: QuantileGrid,
    basis_sizes=(5, 8, 12),
    folds: int = 5,
    seed: int = 0,
    n_lambda: int = 20,
    min_ratio: float = 0.01,
    phi: float = 3.0,
    degree: int = 3,
    tol: float = 1e-5,
    max_iter: int = 600,
) -> SoqfrModel:
    """Tune basis size and penalty level by fold-wise summed squared error.

    Quantile-function features are strongly collinear, so the inner path
    fits use the same loosened descent tolerances as the main tuner.
    """
    assign = fold_assignment(train.ids, folds, seed)
    members: list[list] = [[] for _ in range(folds)]
    for subject in train.subjects:
        members[assign[subject.id]].append(subject)

    best_key = None
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for nb in basis_sizes:
            basis = make_basis(grid.levels, nb, degree)
            feats_full = soqfr_features(train, grid, basis)
            blocks_full = standardize_design(
                train.outcome_matrix(), train.covariate_matrix(), feats_full
            )
            lambdas = lambda_path(blocks_full, n_lambda, min_ratio)
            sse = np.zeros(lambdas.size)
            for v in range(folds):
                fit_subjects = [s for w, group in enumerate(members) if w != v for s in group]
                ds_fit = Dataset(tuple(fit_subjects), train.dims)
                ds_held = Dataset(tuple(members[v]), train.dims)
                feats_fit = soqfr_features(ds_fit, grid, basis)
                blocks_fit = standardize_design(
                    ds_fit.outcome_matrix(), ds_fit.covariate_matrix(), feats_fit
                )
                feats_held = soqfr_features(ds_held, grid, basis)
                x_held = ds_held.covariate_matrix()
                y_held = ds_held.outcome_matrix()
                warm = None
                for j, lam in enumerate(lambdas):
                    res = fit(blocks_fit, McpSpec(lam=float(lam), phi=phi),
                              tol=tol, max_iter=max_iter, warm=warm)
                    warm = res.theta_std
                    pred = res.intercept + x_held @ res.gamma + feats_held @ res.theta
                    sse[j] += float(np.sum((y_held - pred) ** 2))
            for j, lam in enumerate(lambdas):
                key = (float(sse[j]), nb, -float(lam))
                if best_key is None or key < best_key:
                    best_key = key
                    best = (nb, float(lam))

    nb, lam = best
    # The selected penalty often sits at the path floor, where the heavily
    # collinear quantile design converges slowly in coefficients while its
    # predictions settle early; a capped polish is all the refit needs.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fit_soqfr(train, grid, nb, McpSpec(lam=lam, phi=phi),
                         degree=degree, tol=min(tol, 1e-6), max_iter=3000)


def composite_dataset(dataset: Dataset, weights=None) -> Dataset:
    """Collapse each draw row to one scalar (default: the coordinate sum).

    Produces a d = 1 dataset so the quantile-function machinery can run
    unchanged on a per-draw composite.
    """
    d = dataset.dims.n_draw_dims
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.size != d:
        raise DataError(f"weights have length {w.size}, expected {d}")
    subjects = tuple(
        SubjectRecord(id=s.id, y=s.y, x=s.x, z_samples=(s.z_samples @ w)[:, None])
        for s in dataset.subjects
    )
    return Dataset(subjects, dataset.dims._replace(n_draw_dims=1))
