"""Tensor-product spline features averaged over each subject's draws.

A d-dimensional tensor basis multiplies one univariate basis value per
dimension.  The flat feature index is C-ordered: the first dimension
varies slowest and the last dimension fastest, i.e. for d = 3 the entry
for per-dimension indices (a, b, c) lands at ``(a * N2 + b) * N3 + c``.
This convention is fixed and shared by every consumer (coefficients,
surface evaluation, serialization).

Averaging the tensor feature map over a subject's draws turns the
expected effect-surface value under the subject's latent distribution
into a plain linear feature, so no density estimation is ever needed.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .bspline import BSplineBasis, eval_basis_batch, make_basis
from .core import Dataset
from .errors import DataError

if TYPE_CHECKING:  # pragma: no cover
    from .solver import FitResult


@dataclass(frozen=True)
class TensorBasis:
    """One univariate basis per draw dimension; n0 = product of basis sizes."""

    bases: tuple[BSplineBasis, ...]

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(self.bases))
        if not self.bases:
            raise DataError("tensor basis needs at least one dimension")

    @property
    def n_dims(self) -> int:
        return len(self.bases)

    @property
    def n0(self) -> int:
        return int(np.prod([b.n_basis for b in self.bases]))


def tensor_rows(tb: TensorBasis, z_samples) -> np.ndarray:
    """Tensor feature rows for a matrix of points; returns (m, n0).

    Each row multiplies per-dimension basis values and sums to one.
    """
    z = np.asarray(z_samples, dtype=float)
    if z.ndim != 2 or z.shape[1] != tb.n_dims:
        raise DataError(
            f"points have shape {z.shape}, expected (m, {tb.n_dims})"
        )
    rows = eval_basis_batch(tb.bases[0], z[:, 0])
    for dim in range(1, tb.n_dims):
        nxt = eval_basis_batch(tb.bases[dim], z[:, dim])
        rows = (rows[:, :, None] * nxt[:, None, :]).reshape(z.shape[0], -1)
    return rows


def tensor_row(tb: TensorBasis, z) -> np.ndarray:
    """Tensor feature vector (length n0) for a single d-dimensional point."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != tb.n_dims:
        raise DataError(f"point has length {z.size}, expected {tb.n_dims}")
    return tensor_rows(tb, z[None, :])[0]


def subject_features(tb: TensorBasis, z_samples) -> np.ndarray:
    """Average the tensor rows over a subject's draws (the length-n0 feature)."""
    z = np.asarray(z_samples, dtype=float)
    if z.ndim != 2 or z.shape[0] < 1:
        raise DataError("subject needs a nonempty (m, d) draw matrix")
    return tensor_rows(tb, z).mean(axis=0)


def feature_matrix(tb: TensorBasis, dataset: Dataset) -> np.ndarray:
    """Raw averaged-feature rows for every subject; returns (n, n0).

    Per-dimension basis values are computed in one vectorized pass over
    the pooled draws, then combined and averaged subject by subject.
    """
    counts = [s.n_draws for s in dataset.subjects]
    pooled = np.concatenate([s.z_samples for s in dataset.subjects], axis=0)
    per_dim = [eval_basis_batch(tb.bases[j], pooled[:, j]) for j in range(tb.n_dims)]

    out = np.empty((len(dataset), tb.n0))
    start = 0
    for i, m in enumerate(counts):
        stop = start + m
        rows = per_dim[0][start:stop]
        for j in range(1, tb.n_dims):
            rows = (rows[:, :, None] * per_dim[j][start:stop, None, :]).reshape(m, -1)
        out[i] = rows.mean(axis=0)
        start = stop
    return out


def pooled_training_basis(dataset: Dataset, basis_counts, degree: int = 3) -> TensorBasis:
    """Build the shared tensor basis from draws pooled across all subjects."""
    counts = tuple(int(c) for c in basis_counts)
    if len(counts) != dataset.dims.n_draw_dims:
        raise DataError(
            f"got {len(counts)} basis counts for {dataset.dims.n_draw_dims} draw dimensions"
        )
    pooled = np.concatenate([s.z_samples for s in dataset.subjects], axis=0)
    bases = tuple(make_basis(pooled[:, j], counts[j], degree) for j in range(len(counts)))
    return TensorBasis(bases)


@dataclass(frozen=True)
class Standardization:
    """Centers/scales learned on training data, reused at prediction time.

    ``active`` flags feature columns with nonzero variance; inactive
    columns are excluded from penalty groups and pinned to coefficient 0.
    Scales use the 1/n denominator so standardized columns satisfy
    (1/n) * sum(w^2) = 1 exactly, which makes the solver's closed-form
    group update exact.
    """

    w_center: np.ndarray
    w_scale: np.ndarray
    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        for name in ("w_center", "w_scale", "x_center", "x_scale", "y_center", "active"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class DesignBlocks:
    """Standardized design for the solver.

    ``Y`` is column-centered, ``X`` and ``W`` are column-standardized;
    the stored centers/scales invert the transforms.  Zero-variance
    feature columns are flagged in ``active`` and stored as all-zero
    columns with a placeholder scale of 1.
    """

    Y: np.ndarray
    X: np.ndarray
    W: np.ndarray
    w_center: np.ndarray
    w_scale: np.ndarray
    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: np.ndarray
    active: np.ndarray

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def standardization(self) -> Standardization:
        return Standardization(
            w_center=self.w_center,
            w_scale=self.w_scale,
            x_center=self.x_center,
            x_scale=self.x_scale,
            y_center=self.y_center,
            active=self.active,
        )


def _standardize_columns(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    center = mat.mean(axis=0) if mat.size else np.zeros(mat.shape[1])
    centered = mat - center
    scale = np.sqrt((centered**2).mean(axis=0)) if mat.size else np.zeros(mat.shape[1])
    # Constant columns can pick up ~1 ulp of spurious variance from the
    # centering arithmetic; anything this far below the column magnitude
    # is noise, not signal.
    active = scale > 1e-12 * np.maximum(1.0, np.abs(center))
    safe = np.where(active, scale, 1.0)
    out = np.where(active, centered / safe, 0.0)
    return out, center, np.where(active, scale, 1.0), active


def standardize_design(y: np.ndarray, x: np.ndarray, w: np.ndarray) -> DesignBlocks:
    """Center outcomes and standardize covariate/feature columns.

    Accepts arbitrary raw matrices, so baseline models can reuse the same
    solver path with their own feature constructions.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float).reshape(y.shape[0], -1)
    w = np.asarray(w, dtype=float)
    y_center = y.mean(axis=0)
    x_std, x_center, x_scale, _ = _standardize_columns(x)
    w_std, w_center, w_scale, active = _standardize_columns(w)
    return DesignBlocks(
        Y=y - y_center,
        X=x_std,
        W=w_std,
        w_center=w_center,
        w_scale=w_scale,
        x_center=x_center,
        x_scale=x_scale,
        y_center=y_center,
        active=active,
    )


def build_design(dataset: Dataset, tb: TensorBasis) -> DesignBlocks:
    """Assemble the standardized design for a dataset under a tensor basis."""
    return standardize_design(
        dataset.outcome_matrix(),
        dataset.covariate_matrix(),
        feature_matrix(tb, dataset),
    )


def destandardized_features(blocks: DesignBlocks) -> np.ndarray:
    """Invert the column standardization of W (round-trip of the raw features)."""
    return blocks.W * blocks.w_scale + blocks.w_center


def distributional_score(fit: "FitResult", z_samples, outcome: int) -> float:
    """Averaged fitted-surface value for one subject's draws and one outcome.

    This is the raw-scale distributional linear predictor (the model's
    biomarker for the subject); it excludes the intercept and covariates.
    """
    theta = fit.theta
    if not 0 <= outcome < theta.shape[1]:
        raise DataError(f"outcome index {outcome} out of range for K={theta.shape[1]}")
    feats = subject_features(fit.basis, z_samples)
    return float(feats @ theta[:, outcome])
