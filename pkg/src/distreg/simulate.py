"""Seedable synthetic-data generators with stored ground truth.

Both benchmark scenarios share one generative law with K = 2 outcomes,
q = 2 covariates, and d = 2 draw dimensions:

    x_i      ~ N(0, [[1, 0.5], [0.5, 1]])
    mu_i     ~ N(0, I_2)            (per-subject draw-cloud center)
    c_i      ~ Uniform(1, 3)        (per-subject draw-cloud spread)
    z_il     ~ N(mu_i, c_i * [[1, 0.3], [0.3, 1]]),   l = 1..m
    y_ik     = gamma_k' x_i + mean_l beta_k(z_il) + eps_ik,  eps_ik ~ N(0, 1)

with effect surfaces beta_1(u, v) = (u^2 + v^2) / 2 and
beta_2(u, v) = (u + 4 v + 2 u v) / 3 and covariate effects
gamma_1 = (1, 3), gamma_2 = (2, 4).

By default the outcome's distributional term is the empirical average of
the surface over the generated draws, so the stored signal satisfies
y - signal - covariate part = noise exactly; the population-integral
variant (closed-form Gaussian moments) sits behind ``analytic_integral``.
Every subject is generated from its own derived seed (seed, 0, index), so
per-subject generation can run in any order or in parallel and still
produce identical data.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Dataset, Dims, SplitPlan, SubjectRecord, split
from .errors import DataError

TRUE_GAMMA = np.array([[1.0, 2.0], [3.0, 4.0]])  # column k = effects on outcome k
X_COV = np.array([[1.0, 0.5], [0.5, 1.0]])
Z_COV = np.array([[1.0, 0.3], [0.3, 1.0]])
SPREAD_RANGE = (1.0, 3.0)

_X_CHOL = np.linalg.cholesky(X_COV)
_Z_CHOL = np.linalg.cholesky(Z_COV)


def true_beta(k: int, u, v):
    """True effect surface for outcome ``k`` (0-based) at (u, v)."""
    if k == 0:
        return 0.5 * (np.asarray(u) ** 2 + np.asarray(v) ** 2)
    if k == 1:
        return (np.asarray(u) + 4.0 * np.asarray(v) + 2.0 * np.asarray(u) * np.asarray(v)) / 3.0
    raise DataError(f"outcome index {k} out of range for the synthetic scenarios")


def _beta_callables() -> tuple[Callable, Callable]:
    return (lambda u, v: true_beta(0, u, v), lambda u, v: true_beta(1, u, v))


def _analytic_integrals(mu: np.ndarray, c: np.ndarray) -> np.ndarray:
    # Gaussian moments: E u^2 = mu1^2 + c, E uv = mu1 mu2 + 0.3 c.
    first = 0.5 * (mu[:, 0] ** 2 + mu[:, 1] ** 2) + c
    second = (mu[:, 0] + 4.0 * mu[:, 1] + 2.0 * (mu[:, 0] * mu[:, 1] + 0.3 * c)) / 3.0
    return np.column_stack([first, second])


@dataclass(frozen=True)
class ScenarioA1Config:
    """Size and seeding for the estimation benchmark (scenario a1)."""

    n: int
    m: int = 1000
    seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.n < 10:
            raise DataError("scenario needs at least 10 subjects")
        if self.m < 1:
            raise DataError("each subject needs at least one draw")
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise DataError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class GroundTruth:
    """Everything needed to score a fit against the generative law."""

    scenario: str
    gamma: np.ndarray
    beta_funcs: tuple[Callable, ...]
    subject_ids: tuple[str, ...]
    signal: np.ndarray
    mu: np.ndarray | None = None
    spread: np.ndarray | None = None
    analytic_integral: bool = False

    def signal_for(self, ids) -> np.ndarray:
        index = {sid: j for j, sid in enumerate(self.subject_ids)}
        return self.signal[[index[i] for i in ids]]


def gen_scenario_a1(
    cfg: ScenarioA1Config,
    zero_noise: bool = False,
    zero_gamma: bool = False,
    analytic_integral: bool = False,
) -> tuple[Dataset, GroundTruth]:
    """Generate the estimation benchmark; returns the full dataset plus truth.

    ``zero_noise`` and ``zero_gamma`` are debug switches that drop the
    noise / covariate terms so construction identities can be checked
    exactly.  ``analytic_integral`` swaps the empirical draw average for
    the closed-form population integral in the outcome signal.
    """
    subjects = []
    signal = np.empty((cfg.n, 2))
    mu_all = np.empty((cfg.n, 2))
    spread_all = np.empty(cfg.n)
    gamma = np.zeros_like(TRUE_GAMMA) if zero_gamma else TRUE_GAMMA

    for i in range(cfg.n):
        rng = np.random.default_rng((cfg.seed, 0, i))
        x = _X_CHOL @ rng.standard_normal(2)
        mu = rng.standard_normal(2)
        c = rng.uniform(*SPREAD_RANGE)
        z = mu + np.sqrt(c) * rng.standard_normal((cfg.m, 2)) @ _Z_CHOL.T
        eps = np.zeros(2) if zero_noise else rng.standard_normal(2)

        if analytic_integral:
            integ = _analytic_integrals(mu[None, :], np.array([c]))[0]
        else:
            integ = np.array([true_beta(k, z[:, 0], z[:, 1]).mean() for k in range(2)])

        y = x @ gamma + integ + eps
        subjects.append(SubjectRecord(id=f"s{i:06d}", y=y, x=x, z_samples=z))
        signal[i] = integ
        mu_all[i] = mu
        spread_all[i] = c

    dataset = Dataset(tuple(subjects), Dims(2, 2, 2))
    truth = GroundTruth(
        scenario="a1",
        gamma=gamma,
        beta_funcs=_beta_callables(),
        subject_ids=dataset.ids,
        signal=signal,
        mu=mu_all,
        spread=spread_all,
        analytic_integral=analytic_integral,
    )
    return dataset, truth


def split_train_test(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Exact-count shuffled split: floor(fraction * n) subjects train, rest test."""
    if not 0.0 < fraction < 1.0:
        raise DataError("fraction must lie in (0, 1)")
    n = len(dataset)
    n_train = int(np.floor(fraction * n))
    if n_train < 1 or n_train >= n:
        raise DataError(f"fraction {fraction} leaves an empty part for n={n}")
    perm = np.random.default_rng((seed, 1)).permutation(n)
    chosen = np.zeros(n, dtype=bool)
    chosen[perm[:n_train]] = True
    train = tuple(s for s, keep in zip(dataset.subjects, chosen) if keep)
    test = tuple(s for s, keep in zip(dataset.subjects, chosen) if not keep)
    return Dataset(train, dataset.dims), Dataset(test, dataset.dims)


def gen_scenario_a2(
    cfg: ScenarioA1Config,
    zero_noise: bool = False,
    analytic_integral: bool = False,
) -> tuple[Dataset, Dataset, Dataset, Dataset, GroundTruth]:
    """Generate the coverage benchmark: (train1, train2, calibration, test, truth).

    The train fraction of subjects (exact count) is partitioned three
    ways with equal per-subject probability; the remainder is the test
    set.  Same generative law as scenario a1.
    """
    dataset, truth = gen_scenario_a1(
        cfg, zero_noise=zero_noise, analytic_integral=analytic_integral
    )
    pool, test = split_train_test(dataset, cfg.train_fraction, cfg.seed)
    three_way_seed = int(np.random.SeedSequence((cfg.seed, 2)).generate_state(1)[0])
    train1, train2, calibration = split(
        pool, SplitPlan(proportions=(1 / 3, 1 / 3, 1 / 3), seed=three_way_seed)
    )
    return train1, train2, calibration, test, truth
