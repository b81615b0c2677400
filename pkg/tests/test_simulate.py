import numpy as np
import pytest

from distreg.core import validate
from distreg.errors import DataError
from distreg.features import build_design, pooled_training_basis
from distreg.simulate import (
    SPREAD_RANGE,
    TRUE_GAMMA,
    ScenarioA1Config,
    gen_scenario_a1,
    gen_scenario_a2,
    split_train_test,
    true_beta,
)
from distreg.solver import McpSpec, fit, lambda_path


class TestTrueBeta:
    def test_first_surface_at_origin(self):
        assert true_beta(0, 0.0, 0.0) == 0.0

    def test_first_surface_by_hand(self):
        assert true_beta(0, 1.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_second_surface_by_hand(self):
        assert true_beta(1, 1.0, 1.0) == pytest.approx(7 / 3, abs=1e-15)

    def test_invalid_outcome(self):
        with pytest.raises(DataError):
            true_beta(2, 0.0, 0.0)


class TestConfig:
    def test_rejects_tiny_n(self):
        with pytest.raises(DataError):
            ScenarioA1Config(n=5, m=10, seed=0)

    def test_rejects_bad_fraction(self):
        with pytest.raises(DataError):
            ScenarioA1Config(n=100, m=10, seed=0, train_fraction=1.0)


class TestScenarioA1:
    def test_dimensions(self):
        ds, truth = gen_scenario_a1(ScenarioA1Config(n=20, m=7, seed=1))
        assert ds.dims == (2, 2, 2)
        assert all(s.n_draws == 7 for s in ds.subjects)
        validate(ds)
        assert truth.gamma is TRUE_GAMMA

    def test_noiseless_zero_gamma_outcome_equals_stored_signal(self):
        ds, truth = gen_scenario_a1(
            ScenarioA1Config(n=15, m=20, seed=2), zero_noise=True, zero_gamma=True
        )
        assert np.array_equal(ds.outcome_matrix(), truth.signal)

    def test_signal_is_draw_average_of_surface(self):
        ds, truth = gen_scenario_a1(ScenarioA1Config(n=12, m=9, seed=3))
        for i, s in enumerate(ds.subjects):
            for k in range(2):
                expected = true_beta(k, s.z_samples[:, 0], s.z_samples[:, 1]).mean()
                assert truth.signal[i, k] == pytest.approx(expected, rel=1e-12)

    def test_outcome_decomposition_recovers_noise_moments(self):
        cfg = ScenarioA1Config(n=4000, m=3, seed=4)
        ds, truth = gen_scenario_a1(cfg)
        eps = ds.outcome_matrix() - ds.covariate_matrix() @ truth.gamma - truth.signal
        assert np.allclose(eps.mean(axis=0), 0.0, atol=3 / np.sqrt(4000))
        assert np.allclose(eps.std(axis=0), 1.0, atol=0.05)

    def test_byte_identical_reproducibility(self):
        a, _ = gen_scenario_a1(ScenarioA1Config(n=25, m=11, seed=9))
        b, _ = gen_scenario_a1(ScenarioA1Config(n=25, m=11, seed=9))
        for sa, sb in zip(a.subjects, b.subjects):
            assert sa.id == sb.id
            assert np.array_equal(sa.y, sb.y)
            assert np.array_equal(sa.x, sb.x)
            assert np.array_equal(sa.z_samples, sb.z_samples)

    def test_subject_streams_independent_of_n(self):
        # Per-subject derived seeds: subject i is identical whether the
        # dataset has 12 or 40 subjects.
        small, _ = gen_scenario_a1(ScenarioA1Config(n=12, m=5, seed=6))
        large, _ = gen_scenario_a1(ScenarioA1Config(n=40, m=5, seed=6))
        for i in range(12):
            assert np.array_equal(small.subjects[i].y, large.subjects[i].y)
            assert np.array_equal(small.subjects[i].z_samples, large.subjects[i].z_samples)

    def test_analytic_integral_close_to_empirical_at_large_m(self):
        emp, t_emp = gen_scenario_a1(ScenarioA1Config(n=10, m=50_000, seed=7))
        _, t_ana = gen_scenario_a1(ScenarioA1Config(n=10, m=1, seed=7), analytic_integral=True)
        assert np.allclose(t_emp.signal, t_ana.signal, atol=0.25)

    def test_covariate_covariance_moment(self):
        ds, _ = gen_scenario_a1(ScenarioA1Config(n=100_000, m=1, seed=8))
        x = ds.covariate_matrix()
        cov = np.cov(x.T)
        # 3 MC standard errors for the off-diagonal of a standard bivariate
        # normal with correlation 0.5: sqrt((1 + rho^2) / n).
        se = np.sqrt((1 + 0.25) / 100_000)
        assert abs(cov[0, 1] - 0.5) < 3 * se
        assert abs(cov[0, 0] - 1.0) < 3 * np.sqrt(2 / 100_000)

    def test_subject_moments(self):
        ds, truth = gen_scenario_a1(ScenarioA1Config(n=100_000, m=1, seed=10))
        mu = truth.mu
        c = truth.spread
        assert abs(mu.mean()) < 3 / np.sqrt(2 * 100_000)
        assert abs(mu.std() - 1.0) < 0.02
        lo, hi = SPREAD_RANGE
        assert abs(c.mean() - (lo + hi) / 2) < 3 * (hi - lo) / np.sqrt(12 * 100_000)
        assert c.min() >= lo and c.max() <= hi

    def test_within_subject_draw_covariance_tracks_spread(self):
        # One subject resampled with a large draw count: the sample
        # covariance off-diagonal concentrates at 0.3 * c_i.
        m = 200_000
        ds, truth = gen_scenario_a1(ScenarioA1Config(n=10, m=m, seed=11))
        for i in [0, 3]:
            c = truth.spread[i]
            cov = np.cov(ds.subjects[i].z_samples.T)
            se = c * np.sqrt((1 + 0.09) / m)
            assert abs(cov[0, 1] - 0.3 * c) < 3 * se


class TestScenarioA2:
    def test_partition_and_exact_test_fraction(self):
        cfg = ScenarioA1Config(n=500, m=3, seed=12)
        train1, train2, calib, test, _ = gen_scenario_a2(cfg)
        assert len(test) == 100
        assert len(train1) + len(train2) + len(calib) == 400
        ids = [sid for part in (train1, train2, calib, test) for sid in part.ids]
        assert len(set(ids)) == 500

    def test_deterministic(self):
        cfg = ScenarioA1Config(n=120, m=2, seed=13)
        first = gen_scenario_a2(cfg)
        second = gen_scenario_a2(cfg)
        for a, b in zip(first[:4], second[:4]):
            assert a.ids == b.ids

    def test_three_way_sizes_reasonable(self):
        cfg = ScenarioA1Config(n=3000, m=1, seed=14)
        train1, train2, calib, _, _ = gen_scenario_a2(cfg)
        for part in (train1, train2, calib):
            assert abs(len(part) / 2400 - 1 / 3) < 0.05


class TestSplitTrainTest:
    def test_exact_counts(self):
        ds, _ = gen_scenario_a1(ScenarioA1Config(n=103, m=1, seed=15))
        train, test = split_train_test(ds, 0.8, 15)
        assert len(train) == 82 and len(test) == 21

    def test_deterministic_and_disjoint(self):
        ds, _ = gen_scenario_a1(ScenarioA1Config(n=50, m=1, seed=16))
        a = split_train_test(ds, 0.7, 5)
        b = split_train_test(ds, 0.7, 5)
        assert a[0].ids == b[0].ids
        assert set(a[0].ids).isdisjoint(a[1].ids)


def test_noiseless_fit_recovers_covariate_effects():
    # Identifiability check first: regressing the outcome on the stored
    # signal recovers gamma exactly; the spline pipeline must then get
    # within 0.05 at a weak penalty.
    cfg = ScenarioA1Config(n=400, m=40, seed=17)
    ds, truth = gen_scenario_a1(cfg, zero_noise=True)
    y = ds.outcome_matrix()
    x = ds.covariate_matrix()
    design = np.hstack([np.ones((len(ds), 1)), x, truth.signal])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    assert np.allclose(coef[1:3], truth.gamma, atol=1e-8)

    tb = pooled_training_basis(ds, (8, 8))
    blocks = build_design(ds, tb)
    path = lambda_path(blocks, n_lambda=8, min_ratio=1e-4)
    warm = None
    for lam in path:
        res = fit(blocks, McpSpec(lam=float(lam)), tol=1e-6, max_iter=2000,
                  warm=warm, basis=tb)
        warm = res.theta_std
    assert np.allclose(res.gamma, truth.gamma, atol=0.05)
