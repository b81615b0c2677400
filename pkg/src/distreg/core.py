"""Subject-level data model: records, datasets, and seeded dataset splitting.

A subject couples a length-K outcome vector, a length-q vector of scalar
covariates, and an (m_i, d) matrix of draws from the subject's latent
d-dimensional distribution.  Draw counts m_i may differ across subjects.
All types are immutable after construction; splitting is a pure function
of (dataset, plan) and operates on whole subjects, never on single draws.
"""

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DataError


class Dims(NamedTuple):
    """Dataset-level dimensions: outcomes K, covariates q, draw columns d."""

    n_outcomes: int
    n_covariates: int
    n_draw_dims: int


def _as_frozen(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DataError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: outcomes ``y`` (K,), covariates ``x`` (q,), draws ``z_samples`` (m_i, d).

    Construction checks shapes only; cross-subject consistency and
    finiteness are enforced by :func:`validate`.
    """

    id: str
    y: np.ndarray
    x: np.ndarray
    z_samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _as_frozen(self.y, 1))
        object.__setattr__(self, "x", _as_frozen(self.x, 1))
        object.__setattr__(self, "z_samples", _as_frozen(self.z_samples, 2))
        if self.y.size < 1:
            raise DataError(f"subject {self.id!r}: needs at least one outcome")
        if self.z_samples.shape[0] < 1:
            raise DataError(f"subject {self.id!r}: needs at least one draw row")

    @property
    def n_draws(self) -> int:
        return self.z_samples.shape[0]


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of subjects sharing one set of dimensions."""

    subjects: tuple[SubjectRecord, ...]
    dims: Dims

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "dims", Dims(*self.dims))
        if not self.subjects:
            raise DataError("dataset needs at least one subject")

    @classmethod
    def from_subjects(cls, subjects: Sequence[SubjectRecord]) -> "Dataset":
        """Build a dataset, inferring dims from the first subject."""
        subjects = tuple(subjects)
        if not subjects:
            raise DataError("dataset needs at least one subject")
        first = subjects[0]
        dims = Dims(first.y.size, first.x.size, first.z_samples.shape[1])
        return cls(subjects, dims)

    def __len__(self) -> int:
        return len(self.subjects)

    def __iter__(self) -> Iterator[SubjectRecord]:
        return iter(self.subjects)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.subjects)

    def outcome_matrix(self) -> np.ndarray:
        """Stack subject outcomes into an (n, K) matrix."""
        return np.array([s.y for s in self.subjects])

    def covariate_matrix(self) -> np.ndarray:
        """Stack subject covariates into an (n, q) matrix (q may be 0)."""
        return np.array([s.x for s in self.subjects]).reshape(len(self), self.dims.n_covariates)


@dataclass(frozen=True)
class SplitPlan:
    """Proportions for a seeded per-subject random partition.

    Each subject is assigned independently with the given probabilities,
    so realized subset sizes are random (they are not exact counts).
    """

    proportions: tuple[float, ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "proportions", tuple(float(p) for p in self.proportions))
        if not self.proportions:
            raise DataError("split plan needs at least one proportion")
        if any(not (0.0 < p <= 1.0) for p in self.proportions):
            raise DataError("every split proportion must lie in (0, 1]")
        if abs(sum(self.proportions) - 1.0) > 1e-12:
            raise DataError(f"split proportions sum to {sum(self.proportions)!r}, not 1")
        if self.seed < 0:
            raise DataError("seed must be a nonnegative integer")


def split(dataset: Dataset, plan: SplitPlan) -> tuple[Dataset, ...]:
    """Partition ``dataset`` into ``len(plan.proportions)`` disjoint datasets.

    Each subject draws one uniform variate from a generator seeded with
    ``plan.seed`` and is assigned by comparing it against the cumulative
    proportions.  The same (dataset, plan) always produces the same
    partition.  All of a subject's draws travel together.

    Raises
    ------
    DataError
        If any part of the partition comes out empty (datasets must hold
        at least one subject; retry with a different seed or more data).
    """
    rng = np.random.default_rng(plan.seed)
    u = rng.random(len(dataset))
    cuts = np.cumsum(plan.proportions)
    assignment = np.searchsorted(cuts, u, side="right")
    assignment = np.minimum(assignment, len(plan.proportions) - 1)

    parts = []
    for j in range(len(plan.proportions)):
        members = tuple(s for s, a in zip(dataset.subjects, assignment) if a == j)
        if not members:
            raise DataError(
                f"split produced an empty part (index {j}); "
                "use more subjects or a different seed"
            )
        parts.append(Dataset(members, dataset.dims))
    return tuple(parts)


def validate(dataset: Dataset) -> None:
    """Check every dataset invariant, raising on the first violation.

    Verifies per-subject dimension conformity, finiteness of all entries
    (naming the offending row/column for draw matrices), and id uniqueness.
    """
    k, q, d = dataset.dims
    seen: set[str] = set()
    for subject in dataset.subjects:
        if subject.id in seen:
            raise DataError(f"duplicate subject id {subject.id!r}")
        seen.add(subject.id)
        if subject.y.size != k:
            raise DataError(
                f"subject {subject.id!r}: field y has length {subject.y.size}, expected {k}"
            )
        if subject.x.size != q:
            raise DataError(
                f"subject {subject.id!r}: field x has length {subject.x.size}, expected {q}"
            )
        if subject.z_samples.shape[1] != d:
            raise DataError(
                f"subject {subject.id!r}: field z_samples has "
                f"{subject.z_samples.shape[1]} columns, expected {d}"
            )
        if not np.all(np.isfinite(subject.y)):
            raise DataError(f"subject {subject.id!r}: field y contains a non-finite value")
        if not np.all(np.isfinite(subject.x)):
            raise DataError(f"subject {subject.id!r}: field x contains a non-finite value")
        if not np.all(np.isfinite(subject.z_samples)):
            row, col = np.argwhere(~np.isfinite(subject.z_samples))[0]
            raise DataError(
                f"subject {subject.id!r}: field z_samples has a non-finite value "
                f"at row {row}, column {col}"
            )
