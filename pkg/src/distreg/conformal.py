"""Split-conformal hypercube prediction regions for multivariate outcomes.

Calibration consumes two held-out sets: one to learn per-outcome
modulation scales (the sample standard deviation of absolute residuals),
one to collect sup-norm nonconformity scores

    R_i = max_k |Y_ik - prediction_ik| / s_k .

The region radius is the ceil((n_cal + 1) * (1 - alpha))-th smallest
calibration score, the finite-sample-corrected order statistic that makes
the marginal coverage guarantee exact for exchangeable data; the plain
empirical quantile is available behind ``finite_sample_correction=False``
for replication.  The guarantee holds for any predictor whatsoever: the
model argument only needs ``predict(x, z_samples)`` and
``predict_dataset(dataset)`` methods.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Dataset
from .errors import CalibrationError, DataError


@dataclass(frozen=True)
class PredictionRegion:
    """Axis-aligned closed box: per-outcome center and half-width."""

    center: np.ndarray
    half_width: np.ndarray

    def __post_init__(self):
        center = np.array(self.center, dtype=float)
        half = np.array(self.half_width, dtype=float)
        if center.shape != half.shape or center.ndim != 1:
            raise DataError("center and half_width must be 1-d arrays of equal length")
        if np.any(half < 0):
            raise DataError("half widths must be nonnegative")
        center.flags.writeable = False
        half.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_width", half)

    def contains(self, y) -> bool:
        return contains(self, y)


def contains(region: PredictionRegion, y) -> bool:
    """True iff ``y`` lies in the closed box (boundaries count as inside)."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != region.center.size:
        raise DataError(f"outcome has length {y.size}, expected {region.center.size}")
    return bool(np.all(np.abs(y - region.center) <= region.half_width))


@dataclass(frozen=True)
class ConstantModel:
    """A predictor that ignores its inputs; used for model-agnosticity checks."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def predict(self, x, z_samples) -> np.ndarray:
        return self.values.copy()

    def predict_dataset(self, dataset: Dataset) -> np.ndarray:
        return np.tile(self.values, (len(dataset), 1))


@dataclass(frozen=True)
class ConformalModel:
    """A frozen predictor plus modulation scales and the calibrated radius."""

    fit: object
    s: np.ndarray
    scores: np.ndarray
    alpha: float
    q_hat: float
    n_cal: int

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        scores = np.array(self.scores, dtype=float)
        s.flags.writeable = False
        scores.flags.writeable = False
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "scores", scores)


def corrected_quantile_rank(n_cal: int, alpha: float) -> int:
    """ceil((n_cal + 1) * (1 - alpha)), evaluated in exact rational arithmetic.

    Floating-point dust around integer boundaries would otherwise flip
    the rank by one; ``Fraction(alpha)`` makes the ceiling exact for the
    given float alpha.
    """
    return math.ceil((n_cal + 1) * (1 - Fraction(alpha)))


def _radius_from_scores(scores: np.ndarray, alpha: float, corrected: bool) -> float:
    n_cal = scores.size
    if corrected:
        rank = corrected_quantile_rank(n_cal, alpha)
    else:
        rank = math.ceil(n_cal * (1 - Fraction(alpha)))
    if rank > n_cal:
        return math.inf
    # Stable sort: exact ties keep a deterministic rank order, and the
    # selected order statistic equals the tied value either way.
    return float(np.sort(scores, kind="stable")[rank - 1])


def calibrate(
    fit,
    train2: Dataset,
    calibration: Dataset,
    alpha: float,
    finite_sample_correction: bool = True,
) -> ConformalModel:
    """Learn modulation scales on ``train2`` and the radius on ``calibration``.

    ``fit`` must have been trained on data disjoint from both sets.  The
    per-outcome scale s_k is the sample standard deviation (ddof=1) of
    the absolute residuals on ``train2``; a zero scale aborts, since a
    perfectly predicted coordinate signals leakage or a degenerate
    simulation rather than something to paper over.
    """
    if not 0.0 < alpha < 1.0:
        raise DataError("alpha must lie in (0, 1)")
    if len(train2) < 2:
        raise DataError("scale estimation needs at least two subjects")

    abs_resid = np.abs(train2.outcome_matrix() - fit.predict_dataset(train2))
    s = np.std(abs_resid, axis=0, ddof=1)
    if np.any(s <= 0):
        bad = int(np.flatnonzero(s <= 0)[0])
        raise CalibrationError(
            f"modulation scale for outcome {bad} is zero: residuals on the "
            "scale set are constant in that coordinate"
        )

    cal_resid = np.abs(calibration.outcome_matrix() - fit.predict_dataset(calibration))
    scores = np.max(cal_resid / s, axis=1)
    q_hat = _radius_from_scores(scores, alpha, finite_sample_correction)

    return ConformalModel(
        fit=fit,
        s=s,
        scores=np.sort(scores, kind="stable"),
        alpha=float(alpha),
        q_hat=q_hat,
        n_cal=scores.size,
    )


def predict_region(cm: ConformalModel, x, z_samples) -> PredictionRegion:
    """The calibrated box for one subject: prediction +/- q_hat * s."""
    center = np.asarray(cm.fit.predict(x, z_samples), dtype=float)
    return PredictionRegion(center=center, half_width=cm.q_hat * cm.s)


def empirical_coverage(cm: ConformalModel, test: Dataset) -> float:
    """Fraction of test subjects whose outcome lands inside their box."""
    centers = cm.fit.predict_dataset(test)
    resid = np.abs(test.outcome_matrix() - centers)
    covered = np.all(resid <= cm.q_hat * cm.s, axis=1)
    return float(np.mean(covered))
