"""Evaluation: out-of-sample R^2, surface L2 loss, and surface export."""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .core import Dataset
from .errors import DataError
from .features import tensor_rows

_AXIS_NAMES = ("u", "v", "w")


def r_squared(y_true, y_pred) -> np.ndarray:
    """Per-outcome out-of-sample R^2, with the reference mean taken from
    ``y_true`` itself.  Can be negative for models worse than the mean."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise DataError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    center = y_true.mean(axis=0)
    ss_tot = np.sum((y_true - center) ** 2, axis=0)
    if np.any(ss_tot <= 0):
        bad = int(np.flatnonzero(ss_tot <= 0)[0])
        raise DataError(f"outcome {bad} has zero variance in the evaluation set")
    ss_res = np.sum((y_true - y_pred) ** 2, axis=0)
    return 1.0 - ss_res / ss_tot


def pooled_quantile_window(dataset: Dataset, lower: float = 0.025, upper: float = 0.975) -> np.ndarray:
    """Per-dimension [lower, upper] quantile box of the pooled draws; (d, 2)."""
    pooled = np.concatenate([s.z_samples for s in dataset.subjects], axis=0)
    return np.quantile(pooled, [lower, upper], axis=0).T


def _midpoint_grid(window: np.ndarray, n_grid: int) -> tuple[np.ndarray, float]:
    # Cell-centered points per dimension; weights sum exactly to the box area.
    window = np.asarray(window, dtype=float)
    axes = []
    cell = 1.0
    for lo, hi in window:
        if not hi > lo:
            raise DataError("evaluation window must have positive width in every dimension")
        step = (hi - lo) / n_grid
        axes.append(lo + step * (np.arange(n_grid) + 0.5))
        cell *= step
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes)), cell


def l2_grid_distance(values_a, values_b, cell_area: float) -> float:
    """Riemann-sum L2 distance between two surfaces sampled on one grid."""
    diff = np.asarray(values_a, dtype=float) - np.asarray(values_b, dtype=float)
    return float(np.sqrt(np.sum(diff**2) * cell_area))


def beta_l2_loss(fit, truth, window, n_grid: int = 50) -> np.ndarray:
    """Per-outcome L2 distance between fitted and true effect surfaces.

    Approximated on a cell-centered n_grid x n_grid grid over ``window``
    (a (2, 2) array of per-dimension bounds).  Spline extrapolation
    beyond the data support is meaningless, so callers should pass a
    central quantile box of the training draws (see
    :func:`pooled_quantile_window`).

    The fitted intercept is folded into the surface before differencing:
    the generative model carries its constant level inside the surface
    (it has no intercept term), while the fitted decomposition splits an
    arbitrary constant between surface and intercept — tensor features
    sum to one, so only the sum of the two is identified.  Folding makes
    the comparison level-consistent.
    """
    window = np.asarray(window, dtype=float)
    if window.shape != (2, 2):
        raise DataError("surface loss is defined for two draw dimensions")
    points, cell = _midpoint_grid(window, n_grid)
    rows = tensor_rows(fit.basis, points)
    fitted = rows @ fit.theta + fit.intercept
    losses = []
    for k, func in enumerate(truth.beta_funcs):
        true_vals = np.asarray(func(points[:, 0], points[:, 1]), dtype=float)
        losses.append(l2_grid_distance(fitted[:, k], true_vals, cell))
    return np.array(losses)


def export_surface(fit, outcome: int, window, n_grid: int = 50) -> pd.DataFrame:
    """Fitted surface values on a regular grid, ready for plotting tools.

    Columns are the axis coordinates (u, v, w as applicable) plus
    ``value``; grid points include the window endpoints.
    """
    theta = fit.theta
    if not 0 <= outcome < theta.shape[1]:
        raise DataError(f"outcome index {outcome} out of range for K={theta.shape[1]}")
    window = np.asarray(window, dtype=float)
    d = fit.basis.n_dims
    if window.shape != (d, 2):
        raise DataError(f"window has shape {window.shape}, expected ({d}, 2)")
    axes = [np.linspace(lo, hi, n_grid) for lo, hi in window]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    values = tensor_rows(fit.basis, points) @ theta[:, outcome]
    names = [_AXIS_NAMES[j] if j < 3 else f"z{j + 1}" for j in range(d)]
    frame = pd.DataFrame(points, columns=names)
    frame["value"] = values
    return frame


@dataclass(frozen=True)
class EvalReport:
    """Per-outcome R^2, per-subject predictions, and optional extras."""

    r2: np.ndarray
    subject_ids: tuple[str, ...]
    predictions: np.ndarray
    surface_loss: np.ndarray | None = None
    coverage: float | None = None

    def to_json_dict(self) -> dict:
        out = {
            "r2": [float(v) for v in self.r2],
            "predictions": {
                sid: [float(v) for v in row]
                for sid, row in zip(self.subject_ids, self.predictions)
            },
        }
        if self.surface_loss is not None:
            out["surface_loss"] = [float(v) for v in self.surface_loss]
        if self.coverage is not None:
            out["coverage"] = float(self.coverage)
        return out


def make_report(
    test: Dataset,
    predictions: np.ndarray,
    surface_loss=None,
    coverage: float | None = None,
) -> EvalReport:
    """Bundle predictions on a test set into a report."""
    return EvalReport(
        r2=r_squared(test.outcome_matrix(), predictions),
        subject_ids=test.ids,
        predictions=np.asarray(predictions, dtype=float),
        surface_loss=None if surface_loss is None else np.asarray(surface_loss, dtype=float),
        coverage=coverage,
    )


def predictions_frame(dataset: Dataset, predictions) -> pd.DataFrame:
    """Per-subject predictions as a CSV-ready table (subject_id, pred_1..pred_K).

    Works for any model's ``predict_dataset`` output, so main-model and
    baseline predictions share one export schema.
    """
    predictions = np.asarray(predictions, dtype=float)
    if predictions.shape[0] != len(dataset):
        raise DataError(
            f"{predictions.shape[0]} prediction rows for {len(dataset)} subjects"
        )
    frame = pd.DataFrame(
        predictions, columns=[f"pred_{k + 1}" for k in range(predictions.shape[1])]
    )
    frame.insert(0, "subject_id", dataset.ids)
    return frame
