import numpy as np
import pytest

from distreg.errors import DataError
from distreg.features import (
    TensorBasis,
    build_design,
    distributional_score,
    pooled_training_basis,
    tensor_row,
)
from distreg.metrics import (
    beta_l2_loss,
    export_surface,
    l2_grid_distance,
    make_report,
    pooled_quantile_window,
    r_squared,
)
from distreg.simulate import GroundTruth
from distreg.solver import FitResult, McpSpec, fit

from conftest import random_dataset
from test_features import linear_basis


def fitted_example(theta, intercept=None, counts=(4, 4), seed=6):
    """A real fit whose coefficients are then overridden for hand cases."""
    ds = random_dataset(n=15, m=3, seed=seed)
    tb = pooled_training_basis(ds, counts)
    blocks = build_design(ds, tb)
    res = fit(blocks, McpSpec(lam=0.1), tol=1e-5, max_iter=500, basis=tb)
    override = dict(res.__dict__)
    override["theta"] = np.asarray(theta, dtype=float)
    if intercept is not None:
        override["intercept"] = np.asarray(intercept, dtype=float)
    return ds, FitResult(**override)


def constant_truth(values):
    return GroundTruth(
        scenario="test",
        gamma=np.zeros((2, 2)),
        beta_funcs=tuple((lambda c: (lambda u, v: np.full_like(np.asarray(u, dtype=float), c)))(v)
                         for v in values),
        subject_ids=(),
        signal=np.zeros((0, 2)),
    )


class TestRSquared:
    def test_perfect_prediction(self, rng):
        y = rng.standard_normal((30, 2))
        assert np.allclose(r_squared(y, y), [1.0, 1.0])

    def test_mean_prediction_scores_zero(self, rng):
        y = rng.standard_normal((30, 2))
        pred = np.tile(y.mean(axis=0), (30, 1))
        assert np.allclose(r_squared(y, pred), [0.0, 0.0], atol=1e-12)

    def test_hand_negative_value(self):
        y = np.array([[0.0], [1.0], [2.0]])
        pred = np.zeros((3, 1))
        assert r_squared(y, pred)[0] == pytest.approx(-1.5, abs=1e-12)

    def test_affine_invariance(self, rng):
        y = rng.standard_normal((40, 2))
        pred = y + 0.3 * rng.standard_normal((40, 2))
        base = r_squared(y, pred)
        scaled = r_squared(3.0 * y - 7.0, 3.0 * pred - 7.0)
        assert np.allclose(base, scaled, atol=1e-12)

    def test_zero_variance_rejected(self):
        y = np.ones((5, 1))
        with pytest.raises(DataError):
            r_squared(y, y)

    def test_shape_mismatch(self, rng):
        with pytest.raises(DataError):
            r_squared(rng.standard_normal((5, 2)), rng.standard_normal((5, 1)))


class TestBetaL2Loss:
    unit_window = np.array([[0.0, 1.0], [0.0, 1.0]])

    def test_exact_match_is_zero(self):
        # theta = 0, intercept = 0, truth identically zero.
        ds, res = fitted_example(np.zeros((16, 2)), intercept=np.zeros(2))
        truth = constant_truth([0.0, 0.0])
        loss = beta_l2_loss(res, truth, self.unit_window, n_grid=20)
        assert np.allclose(loss, 0.0, atol=1e-14)

    def test_constant_offset_over_unit_window(self):
        # Fitted surface is the constant c (all-ones coefficients times c,
        # by partition of unity); truth is zero; unit-area window -> |c|.
        c = -2.75
        ds, res = fitted_example(np.full((16, 2), c), intercept=np.zeros(2))
        truth = constant_truth([0.0, 0.0])
        loss = beta_l2_loss(res, truth, self.unit_window, n_grid=25)
        assert np.allclose(loss, abs(c), atol=1e-10)

    def test_intercept_is_folded_into_the_surface(self):
        ds, res = fitted_example(np.zeros((16, 2)), intercept=np.array([1.5, -0.5]))
        truth = constant_truth([1.5, -0.5])
        loss = beta_l2_loss(res, truth, self.unit_window, n_grid=20)
        assert np.allclose(loss, 0.0, atol=1e-12)

    def test_window_shape_checked(self):
        ds, res = fitted_example(np.zeros((16, 2)))
        with pytest.raises(DataError):
            beta_l2_loss(res, constant_truth([0, 0]), np.array([[0.0, 1.0]]))

    def test_pseudometric_on_sampled_surfaces(self, rng):
        cell = 1.0 / 400
        a, b, c = rng.standard_normal((3, 400))
        d_ab = l2_grid_distance(a, b, cell)
        d_ba = l2_grid_distance(b, a, cell)
        assert d_ab == d_ba
        assert l2_grid_distance(a, a, cell) == 0.0
        assert d_ab <= l2_grid_distance(a, c, cell) + l2_grid_distance(c, b, cell) + 1e-12


class TestExportSurface:
    def test_zero_coefficients_zero_surface(self):
        ds, res = fitted_example(np.zeros((16, 2)))
        frame = export_surface(res, 0, self_window(), n_grid=6)
        assert set(frame.columns) == {"u", "v", "value"}
        assert np.all(frame["value"] == 0.0)
        assert len(frame) == 36

    def test_single_basis_function_reproduced_in_one_dim(self, rng):
        subjects = random_dataset(n=12, m=2, n_draw_dims=1, seed=7)
        tb = pooled_training_basis(subjects, (5,))
        blocks = build_design(subjects, tb)
        res = fit(blocks, McpSpec(lam=0.05), tol=1e-5, max_iter=500, basis=tb)
        theta = np.zeros((5, 2))
        theta[2, 0] = 1.0
        res = FitResult(**{**res.__dict__, "theta": theta})
        window = np.array([[tb.bases[0].lo, tb.bases[0].hi]])
        frame = export_surface(res, 0, window, n_grid=40)
        from distreg.bspline import eval_basis

        expected = [eval_basis(tb.bases[0], u)[2] for u in frame["u"]]
        assert np.allclose(frame["value"], expected, atol=1e-12)

    def test_hand_two_by_two_tensor(self):
        tb = TensorBasis((linear_basis(), linear_basis()))
        theta = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]])

        class Stub:
            basis = tb

        stub = Stub()
        stub.theta = theta
        frame = export_surface(stub, 0, np.array([[0.0, 1.0], [0.0, 1.0]]), n_grid=3)
        for _, row in frame.iterrows():
            expected = float(tensor_row(tb, [row["u"], row["v"]]) @ theta[:, 0])
            assert row["value"] == pytest.approx(expected, abs=1e-14)

    def test_grid_points_match_point_mass_scores(self):
        ds, res = fitted_example(np.arange(32, dtype=float).reshape(16, 2))
        frame = export_surface(res, 1, self_window(), n_grid=4)
        for _, row in frame.iterrows():
            score = distributional_score(res, np.array([[row["u"], row["v"]]]), 1)
            assert row["value"] == pytest.approx(score, abs=1e-12)


def self_window():
    return np.array([[-0.5, 0.5], [-0.5, 0.5]])


class TestPredictionsFrame:
    def test_uniform_schema_for_any_model(self, rng):
        from distreg.baselines import fit_mean_summary
        from distreg.metrics import predictions_frame

        ds = random_dataset(n=7, seed=8)
        model = fit_mean_summary(ds)
        frame = predictions_frame(ds, model.predict_dataset(ds))
        assert list(frame.columns) == ["subject_id", "pred_1", "pred_2"]
        assert len(frame) == 7

    def test_row_count_checked(self, rng):
        from distreg.metrics import predictions_frame

        ds = random_dataset(n=7, seed=8)
        with pytest.raises(DataError):
            predictions_frame(ds, np.zeros((6, 2)))


class TestReport:
    def test_report_round_trip_fields(self, rng):
        ds = random_dataset(n=8, seed=9)
        pred = ds.outcome_matrix() + 0.1 * rng.standard_normal((8, 2))
        report = make_report(ds, pred, surface_loss=[1.0, 2.0], coverage=0.9)
        doc = report.to_json_dict()
        assert set(doc) == {"r2", "predictions", "surface_loss", "coverage"}
        assert len(doc["predictions"]) == 8

    def test_window_from_pooled_draws(self, small_dataset):
        window = pooled_quantile_window(small_dataset)
        pooled = np.concatenate([s.z_samples for s in small_dataset.subjects])
        assert window.shape == (2, 2)
        assert np.all(window[:, 0] < window[:, 1])
        assert np.all(window[:, 0] >= pooled.min(axis=0))
        assert np.all(window[:, 1] <= pooled.max(axis=0))
