import numpy as np
import pytest

from distreg.core import Dataset, Dims, SubjectRecord


def make_subject(sid, y, x, z):
    return SubjectRecord(id=sid, y=np.atleast_1d(y), x=np.atleast_1d(x),
                         z_samples=np.atleast_2d(z))


def random_dataset(n=12, n_outcomes=2, n_covariates=2, n_draw_dims=2, m=5, seed=0):
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n):
        subjects.append(SubjectRecord(
            id=f"s{i:04d}",
            y=rng.standard_normal(n_outcomes),
            x=rng.standard_normal(n_covariates),
            z_samples=rng.standard_normal((m, n_draw_dims)),
        ))
    return Dataset(tuple(subjects), Dims(n_outcomes, n_covariates, n_draw_dims))


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_dataset():
    return random_dataset()
