"""Univariate B-spline bases with data-quantile interior knots.

Bases are cubic by default (the degree is exposed mainly so low-degree
cases can be checked against simple closed forms).  Boundary knots sit at
the data minimum/maximum with multiplicity degree+1; interior knots sit at
equally spaced empirical quantiles of the pooled sample.  Evaluation uses
the Cox-de Boor triangular recursion and clamps out-of-range points to the
boundary, so prediction-time inputs slightly outside the training range
still produce a valid (boundary) basis vector.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class BSplineBasis:
    """A univariate spline basis defined by its degree and knot vector."""

    degree: int
    knots: np.ndarray
    n_basis: int

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        knots.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        if self.degree < 0:
            raise DataError("degree must be nonnegative")
        if np.any(np.diff(knots) < 0):
            raise DataError("knots must be nondecreasing")
        if self.n_basis != knots.size - self.degree - 1:
            raise DataError("n_basis must equal len(knots) - degree - 1")
        if self.n_basis < self.degree + 1:
            raise DataError("basis needs at least degree + 1 functions")
        p = self.degree
        if knots[p] != knots[0] or (knots.size > p + 1 and knots[p + 1] <= knots[p]):
            raise DataError("lower boundary knot must repeat exactly degree + 1 times")
        nb = self.n_basis
        if knots[nb] != knots[-1] or knots[nb - 1] >= knots[nb]:
            raise DataError("upper boundary knot must repeat exactly degree + 1 times")

    @property
    def lo(self) -> float:
        return float(self.knots[self.degree])

    @property
    def hi(self) -> float:
        return float(self.knots[self.n_basis])


def make_basis(samples, n_basis: int, degree: int = 3) -> BSplineBasis:
    """Build a basis whose knots are placed at quantiles of ``samples``.

    Parameters
    ----------
    samples : array-like
        Pooled observations defining the support and the knot quantiles.
        Needs at least two distinct finite values.
    n_basis : int
        Number of basis functions; must be at least ``degree + 1``.  The
        ``n_basis - degree - 1`` interior knots sit at quantile levels
        j / (n_int + 1), computed with linear interpolation of order
        statistics.
    degree : int
        Polynomial degree of the spline pieces (cubic by default).

    Duplicate interior knots (from heavily tied samples) are nudged up by
    the smallest representable spacing so the interior sequence is
    strictly increasing.
    """
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise DataError("cannot build a basis from an empty sample")
    if not np.all(np.isfinite(s)):
        raise DataError("samples contain a non-finite value")
    if degree < 0:
        raise DataError("degree must be nonnegative")
    if n_basis < degree + 1:
        raise DataError(f"n_basis={n_basis} is too small for degree {degree}")
    lo = float(s.min())
    hi = float(s.max())
    if lo == hi:
        raise DataError("all samples are identical; basis support is degenerate")

    n_interior = n_basis - degree - 1
    if n_interior > 0:
        levels = np.arange(1, n_interior + 1) / (n_interior + 1)
        interior = np.quantile(s, levels)
        prev = lo
        for j in range(n_interior):
            if interior[j] <= prev:
                interior[j] = np.nextafter(prev, np.inf)
            prev = interior[j]
        if interior[-1] >= hi:
            raise DataError("samples are too heavily tied to place distinct interior knots")
    else:
        interior = np.empty(0)

    knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    return BSplineBasis(degree=degree, knots=knots, n_basis=n_basis)


def eval_basis_batch(basis: BSplineBasis, points) -> np.ndarray:
    """Evaluate all basis functions at each point; returns (len(points), n_basis).

    Points outside [lo, hi] are clamped to the nearest boundary.  Each row
    is nonnegative, sums to one, and has at most degree+1 nonzero entries.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 1:
        raise DataError(f"expected a 1-d point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DataError("evaluation points contain a non-finite value")

    t = basis.knots
    p = basis.degree
    nb = basis.n_basis
    x = np.clip(pts, t[p], t[nb])
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, p, nb - 1)

    m = x.shape[0]
    vals = np.zeros((m, p + 1))
    vals[:, 0] = 1.0
    left = np.empty((m, p + 1))
    right = np.empty((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(m)
        for r in range(j):
            # All spans with indices in [degree, n_basis-1] are nonempty,
            # so these denominators are never zero.
            denom = right[:, r + 1] + left[:, j - r]
            tmp = vals[:, r] / denom
            vals[:, r] = saved + right[:, r + 1] * tmp
            saved = left[:, j - r] * tmp
        vals[:, j] = saved

    out = np.zeros((m, nb))
    cols = span[:, None] - p + np.arange(p + 1)[None, :]
    np.put_along_axis(out, cols, vals, axis=1)
    return out


def eval_basis(basis: BSplineBasis, u: float) -> np.ndarray:
    """Evaluate all basis functions at a single point (clamped to support)."""
    return eval_basis_batch(basis, np.array([float(u)]))[0]
