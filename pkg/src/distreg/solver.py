"""Multi-task group-penalized least squares via cyclic group descent.

All K outcome equations share one design; each design column carries a
group of K coefficients (one per outcome) whose Euclidean norm is
penalized with a minimax concave penalty (MCP).  In the standardized
parameterization the objective is

    (1 / 2n) * sum_i || Y_i - intercept - gamma' X_i - theta' W_i ||^2
        + sum_l P(||theta_l.||_2; lam, phi)

with P the MCP.  Because every standardized column satisfies
(1/n) * w'w = 1 and the K outcome equations are separable, each group
subproblem has an identity Hessian and a closed-form minimizer (the
group firm threshold), so one sweep per group is an exact block update.
The intercept and covariate coefficients are unpenalized and refreshed
by exact least squares at the top of every sweep.  Group gradients are
maintained through precomputed Gram matrices (cheap when n exceeds the
feature count), and sweeps alternate between the full group set and the
currently active set.  Coefficients are mapped back to the raw input
scale after convergence.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .features import DesignBlocks, Standardization, TensorBasis, feature_matrix, subject_features


@dataclass(frozen=True)
class McpSpec:
    """Penalty configuration: level ``lam`` >= 0 and concavity ``phi`` > 1."""

    lam: float
    phi: float = 3.0

    def __post_init__(self):
        if self.lam < 0:
            raise DataError("penalty level lam must be nonnegative")
        if self.phi <= 1:
            raise DataError("concavity phi must exceed 1")


def mcp_penalty(t, spec: McpSpec):
    """MCP value at nonnegative norm ``t``: quadratic up to lam*phi, then flat."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DataError("mcp_penalty expects nonnegative arguments")
    lam, phi = spec.lam, spec.phi
    out = np.where(t <= lam * phi, lam * t - t * t / (2.0 * phi), 0.5 * lam * lam * phi)
    return float(out) if out.ndim == 0 else out


def mcp_derivative(t, spec: McpSpec):
    """d/dt of the MCP for t >= 0 (zero beyond lam*phi)."""
    t = np.asarray(t, dtype=float)
    lam, phi = spec.lam, spec.phi
    out = np.where(t <= lam * phi, lam - t / phi, 0.0)
    return float(out) if out.ndim == 0 else out


def group_firm_threshold(zvec, spec: McpSpec) -> np.ndarray:
    """Closed-form minimizer of 0.5*||theta - z||^2 + MCP(||theta||).

    Zero when ||z|| <= lam, identity when ||z|| >= lam*phi, and a
    rescaled shrinkage in between.  The output is parallel to ``zvec``.
    """
    z = np.asarray(zvec, dtype=float)
    norm = float(np.linalg.norm(z))
    lam, phi = spec.lam, spec.phi
    if norm <= lam:
        return np.zeros_like(z)
    if norm >= lam * phi:
        return z.copy()
    return (phi / (phi - 1.0)) * (1.0 - lam / norm) * z


@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients on both scales plus fit diagnostics.

    ``gamma`` (q, K), ``intercept`` (K,), and ``theta`` (n0, K) are on the
    raw input scale; ``theta_std``/``gamma_std``/``intercept_std`` are the
    standardized-scale copies used for warm starts and stationarity
    checks.  ``basis`` is the tensor basis behind the feature columns
    (None when the design was built from non-tensor features).
    """

    gamma: np.ndarray
    intercept: np.ndarray
    theta: np.ndarray
    theta_std: np.ndarray
    gamma_std: np.ndarray
    intercept_std: np.ndarray
    basis: TensorBasis | None
    standardization: Standardization
    active_groups: frozenset[int]
    objective: float
    iterations: int
    converged: bool
    objective_history: tuple[float, ...] = ()

    @property
    def n_outcomes(self) -> int:
        return self.theta.shape[1]

    def predict(self, x, z_samples) -> np.ndarray:
        """Predicted outcome vector for one subject (raw scale)."""
        x = np.asarray(x, dtype=float).ravel()
        feats = subject_features(self.basis, z_samples)
        return self.intercept + x @ self.gamma + feats @ self.theta

    def predict_dataset(self, dataset) -> np.ndarray:
        """Predicted outcomes for every subject; returns (n, K)."""
        feats = feature_matrix(self.basis, dataset)
        x = dataset.covariate_matrix()
        return self.intercept + x @ self.gamma + feats @ self.theta


class _GramState:
    """Precomputed cross-products shared by the path and the descent loop."""

    def __init__(self, blocks: DesignBlocks):
        n = blocks.n
        self.n = n
        self.y = blocks.Y
        self.active_idx = np.flatnonzero(blocks.active)
        self.w = np.ascontiguousarray(blocks.W[:, self.active_idx])
        self.a = np.hstack([np.ones((n, 1)), blocks.X])
        self.ata_pinv = np.linalg.pinv(self.a.T @ self.a)
        self.at_y = self.a.T @ self.y
        self.at_w = self.a.T @ self.w
        self.wt_y = self.w.T @ self.y / n
        self.wt_a = self.w.T @ self.a / n
        self.wt_w = self.w.T @ self.w / n

    def unpenalized_coef(self, theta: np.ndarray) -> np.ndarray:
        """Exact least-squares intercept/covariate block given theta."""
        rhs = self.at_y - self.at_w @ theta if theta.size else self.at_y
        return self.ata_pinv @ rhs

    def gradients(self, coef_a: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """(1/n) W' R for the current coefficients, all groups at once."""
        g = self.wt_y - self.wt_a @ coef_a
        if theta.size:
            g = g - self.wt_w @ theta
        return g

    def residual(self, coef_a: np.ndarray, theta: np.ndarray) -> np.ndarray:
        pred = self.a @ coef_a
        if theta.size:
            pred = pred + self.w @ theta
        return self.y - pred


def fit(
    blocks: DesignBlocks,
    spec: McpSpec,
    tol: float = 1e-7,
    max_iter: int = 10_000,
    warm: np.ndarray | None = None,
    basis: TensorBasis | None = None,
) -> FitResult:
    """Minimize the penalized criterion by cyclic group descent.

    Parameters
    ----------
    blocks : DesignBlocks
        Standardized design (see :func:`distreg.features.build_design`).
    spec : McpSpec
        Penalty level and concavity.
    tol : float
        Stop when the largest absolute coefficient change over a full
        sweep (groups, covariates, and intercept) falls below this.
    max_iter : int
        Sweep budget; hitting it emits a warning and sets
        ``converged=False`` on the result (never silent).
    warm : ndarray, optional
        Standardized-scale (n0, K) starting value, e.g. ``theta_std``
        from a fit at a nearby penalty level.
    basis : TensorBasis, optional
        Tensor basis recorded on the result for prediction and surface
        evaluation.

    Raises
    ------
    NumericalError
        If the objective becomes non-finite.
    """
    if tol <= 0:
        raise DataError("tol must be positive")
    if max_iter < 1:
        raise DataError("max_iter must be at least 1")
    state = _GramState(blocks)
    n_active = state.w.shape[1]
    n_outcomes = blocks.Y.shape[1]

    if warm is not None:
        warm = np.asarray(warm, dtype=float)
        if warm.shape != (blocks.W.shape[1], n_outcomes):
            raise DataError(
                f"warm start has shape {warm.shape}, expected "
                f"{(blocks.W.shape[1], n_outcomes)}"
            )
        theta = warm[state.active_idx].copy()
    else:
        theta = np.zeros((n_active, n_outcomes))
    coef_a = np.zeros((state.a.shape[1], n_outcomes))

    history: list[float] = []
    converged = False
    sweeps = 0
    all_groups = range(n_active)

    def run_sweep(groups) -> float:
        nonlocal coef_a
        delta = 0.0
        coef_new = state.unpenalized_coef(theta)
        delta = max(delta, float(np.max(np.abs(coef_new - coef_a))))
        coef_a = coef_new
        grad = state.gradients(coef_a, theta)
        for l in groups:
            z = grad[l] + theta[l]
            updated = group_firm_threshold(z, spec)
            change = updated - theta[l]
            if np.any(change != 0.0):
                grad -= state.wt_w[:, l, None] * change[None, :]
                theta[l] = updated
                delta = max(delta, float(np.max(np.abs(change))))
        return delta

    def record_objective() -> None:
        resid = state.residual(coef_a, theta)
        norms = np.linalg.norm(theta, axis=1) if n_active else np.zeros(0)
        value = 0.5 * float(np.sum(resid * resid)) / state.n + float(
            np.sum(mcp_penalty(norms, spec))
        )
        if not np.isfinite(value):
            raise NumericalError(
                f"objective became non-finite at sweep {sweeps} (lam={spec.lam!r})"
            )
        history.append(value)

    while sweeps < max_iter:
        sweeps += 1
        delta = run_sweep(all_groups)
        record_objective()
        if delta < tol:
            converged = True
            break
        # Iterate the active set until stable, then re-check all groups.
        active = [l for l in all_groups if np.any(theta[l] != 0.0)]
        while sweeps < max_iter:
            sweeps += 1
            delta = run_sweep(active)
            record_objective()
            if delta < tol:
                break
        if not converged and sweeps >= max_iter:
            break

    if not converged:
        warnings.warn(
            f"group descent did not converge within {max_iter} sweeps "
            f"(last max change {delta:.3e}, tol {tol:.3e})",
            RuntimeWarning,
        )

    return _assemble_result(
        blocks, theta, coef_a, state.active_idx, basis,
        objective=history[-1], iterations=sweeps, converged=converged,
        history=tuple(history),
    )


def _assemble_result(
    blocks, theta_active, coef_a, active_idx, basis,
    objective, iterations, converged, history,
) -> FitResult:
    n0 = blocks.W.shape[1]
    n_outcomes = blocks.Y.shape[1]

    theta_std = np.zeros((n0, n_outcomes))
    theta_std[active_idx] = theta_active
    theta_raw = theta_std / blocks.w_scale[:, None]

    intercept_std = coef_a[0]
    gamma_std = coef_a[1:]
    gamma_raw = gamma_std / blocks.x_scale[:, None] if gamma_std.size else gamma_std.copy()

    intercept_raw = (
        intercept_std
        + blocks.y_center
        - (blocks.x_center @ gamma_raw if gamma_raw.size else 0.0)
        - blocks.w_center @ theta_raw
    )

    group_norms = np.linalg.norm(theta_std, axis=1)
    return FitResult(
        gamma=gamma_raw,
        intercept=intercept_raw,
        theta=theta_raw,
        theta_std=theta_std,
        gamma_std=gamma_std,
        intercept_std=intercept_std,
        basis=basis,
        standardization=blocks.standardization,
        active_groups=frozenset(int(l) for l in np.flatnonzero(group_norms > 0)),
        objective=objective,
        iterations=iterations,
        converged=converged,
        objective_history=history,
    )


def objective_value(
    blocks: DesignBlocks,
    spec: McpSpec,
    theta_std: np.ndarray,
    gamma_std: np.ndarray,
    intercept_std: np.ndarray,
) -> float:
    """Evaluate the penalized criterion at standardized-scale coefficients."""
    pred = intercept_std + blocks.X @ gamma_std + blocks.W @ theta_std
    resid = blocks.Y - pred
    norms = np.linalg.norm(theta_std[blocks.active], axis=1)
    return 0.5 * float(np.sum(resid * resid)) / blocks.n + float(
        np.sum(mcp_penalty(norms, spec))
    )


def kkt_residuals(blocks: DesignBlocks, result: FitResult, spec: McpSpec) -> tuple[float, float]:
    """Stationarity diagnostics at a fitted point.

    Returns ``(active_residual, zero_excess)``: the largest deviation of
    the per-group gradient from the penalty-gradient direction over
    active groups, and the largest amount by which a zero group's
    gradient norm exceeds lam.  Both are ~0 at an exact fixed point.
    """
    pred = result.intercept_std + blocks.X @ result.gamma_std + blocks.W @ result.theta_std
    resid = blocks.Y - pred
    grad = (blocks.W.T @ resid) / blocks.n

    active_residual = 0.0
    zero_excess = 0.0
    for l in np.flatnonzero(blocks.active):
        g = grad[l]
        t = float(np.linalg.norm(result.theta_std[l]))
        if t > 0:
            target = mcp_derivative(t, spec) * result.theta_std[l] / t
            active_residual = max(active_residual, float(np.linalg.norm(g - target)))
        else:
            zero_excess = max(zero_excess, float(np.linalg.norm(g)) - spec.lam)
    return active_residual, max(zero_excess, 0.0)


def lambda_path(blocks: DesignBlocks, n_lambda: int = 100, min_ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced penalty levels from the smallest all-zero level downward.

    The top of the path is the largest per-group gradient norm at the
    residual of the unpenalized intercept/covariate fit, i.e. the
    smallest level at which every group stays at zero.  The gradients are
    computed through the same Gram products the descent loop uses, so
    fitting exactly at the top of the path thresholds every group to
    zero.  A degenerate all-zero residual yields a single-entry path at 0
    with a warning.
    """
    if n_lambda < 2:
        raise DataError("n_lambda must be at least 2")
    if not 0.0 < min_ratio < 1.0:
        raise DataError("min_ratio must lie in (0, 1)")

    state = _GramState(blocks)
    theta0 = np.zeros((state.w.shape[1], blocks.Y.shape[1]))
    coef0 = state.unpenalized_coef(theta0)
    grad = state.gradients(coef0, theta0)
    # Row-by-row norms keep the arithmetic identical to the threshold calls
    # inside the descent loop.
    lam_max = 0.0
    for l in range(grad.shape[0]):
        lam_max = max(lam_max, float(np.linalg.norm(grad[l])))

    if lam_max <= 0.0:
        warnings.warn(
            "residual after the unpenalized fit is zero; returning a degenerate path",
            RuntimeWarning,
        )
        return np.array([0.0])
    return np.geomspace(lam_max, lam_max * min_ratio, n_lambda)
