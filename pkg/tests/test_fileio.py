import json
import math

import numpy as np
import pytest

from distreg import fileio
from distreg.conformal import calibrate
from distreg.core import validate
from distreg.errors import DataError
from distreg.features import build_design, pooled_training_basis
from distreg.simulate import ScenarioA1Config, gen_scenario_a1, gen_scenario_a2
from distreg.solver import McpSpec, fit

from conftest import random_dataset


@pytest.fixture
def fitted(tmp_path):
    ds, truth = gen_scenario_a1(ScenarioA1Config(n=30, m=5, seed=31))
    tb = pooled_training_basis(ds, (5, 5))
    blocks = build_design(ds, tb)
    spec = McpSpec(lam=0.2, phi=3.0)
    res = fit(blocks, spec, tol=1e-6, max_iter=2000, basis=tb)
    return ds, truth, spec, res


class TestDatasetCsv:
    def test_round_trip(self, tmp_path, small_dataset):
        cov = tmp_path / "covariates.csv"
        drw = tmp_path / "draws.csv"
        fileio.write_dataset(small_dataset, cov, drw)
        back = fileio.read_dataset(cov, drw)
        assert back.dims == small_dataset.dims
        assert back.ids == small_dataset.ids
        for a, b in zip(back.subjects, small_dataset.subjects):
            assert np.array_equal(a.y, b.y)
            assert np.array_equal(a.x, b.x)
            assert np.array_equal(a.z_samples, b.z_samples)

    def test_round_trip_with_zero_covariates(self, tmp_path):
        ds = random_dataset(n=5, n_covariates=0, seed=3)
        fileio.write_dataset(ds, tmp_path / "c.csv", tmp_path / "d.csv")
        back = fileio.read_dataset(tmp_path / "c.csv", tmp_path / "d.csv")
        assert back.dims.n_covariates == 0
        validate(back)

    def test_ragged_draw_counts_survive(self, tmp_path):
        from conftest import make_subject
        from distreg.core import Dataset, Dims

        subjects = (
            make_subject("a", [1.0], [0.5], [[0.0], [1.0], [2.0]]),
            make_subject("b", [2.0], [0.1], [[5.0]]),
        )
        ds = Dataset(subjects, Dims(1, 1, 1))
        fileio.write_dataset(ds, tmp_path / "c.csv", tmp_path / "d.csv")
        back = fileio.read_dataset(tmp_path / "c.csv", tmp_path / "d.csv")
        assert back.subjects[0].n_draws == 3
        assert back.subjects[1].n_draws == 1

    def test_non_numeric_value_reports_line_and_column(self, tmp_path):
        cov = tmp_path / "covariates.csv"
        cov.write_text("subject_id,x1,y1\na,0.5,1.0\nb,oops,2.0\n")
        (tmp_path / "draws.csv").write_text("subject_id,z1\na,0.0\nb,1.0\n")
        with pytest.raises(DataError, match="line 3.*x1"):
            fileio.read_dataset(cov, tmp_path / "draws.csv")

    def test_wrong_field_count_reports_line(self, tmp_path):
        cov = tmp_path / "covariates.csv"
        cov.write_text("subject_id,y1\na,1.0\nb\n")
        (tmp_path / "draws.csv").write_text("subject_id,z1\na,0.0\n")
        with pytest.raises(DataError, match="line 3"):
            fileio.read_dataset(cov, tmp_path / "draws.csv")

    def test_unknown_draw_subject_reports_line(self, tmp_path):
        (tmp_path / "covariates.csv").write_text("subject_id,y1\na,1.0\n")
        drw = tmp_path / "draws.csv"
        drw.write_text("subject_id,z1\na,0.0\nghost,1.0\n")
        with pytest.raises(DataError, match="line 3.*ghost"):
            fileio.read_dataset(tmp_path / "covariates.csv", drw)

    def test_subject_without_draws_rejected(self, tmp_path):
        (tmp_path / "covariates.csv").write_text("subject_id,y1\na,1.0\nb,2.0\n")
        (tmp_path / "draws.csv").write_text("subject_id,z1\na,0.0\n")
        with pytest.raises(DataError, match="'b' has no draw rows"):
            fileio.read_dataset(tmp_path / "covariates.csv", tmp_path / "draws.csv")

    def test_duplicate_subject_rejected(self, tmp_path):
        (tmp_path / "covariates.csv").write_text("subject_id,y1\na,1.0\na,2.0\n")
        (tmp_path / "draws.csv").write_text("subject_id,z1\na,0.0\n")
        with pytest.raises(DataError, match="duplicate"):
            fileio.read_dataset(tmp_path / "covariates.csv", tmp_path / "draws.csv")


class TestModelDocument:
    def test_round_trip_is_exact(self, tmp_path, fitted):
        ds, _, spec, res = fitted
        path = tmp_path / "model.json"
        window = np.array([[-1.0, 2.0], [0.5, 3.5]])
        fileio.save_model(path, res, spec, ds.dims, surface_window=window)
        fit2, spec2, dims2, conf2, window2 = fileio.load_model(path)
        assert conf2 is None
        assert dims2 == ds.dims
        assert spec2.lam == spec.lam and spec2.phi == spec.phi
        assert np.array_equal(fit2.theta, res.theta)
        assert np.array_equal(fit2.gamma, res.gamma)
        assert np.array_equal(fit2.intercept, res.intercept)
        assert np.array_equal(window2, window)
        for b1, b2 in zip(fit2.basis.bases, res.basis.bases):
            assert np.array_equal(b1.knots, b2.knots)
            assert b1.degree == b2.degree
        std1, std2 = res.standardization, fit2.standardization
        for name in ("w_center", "w_scale", "x_center", "x_scale", "y_center"):
            assert np.array_equal(getattr(std1, name), getattr(std2, name))
        assert np.array_equal(std1.active, std2.active)
        assert fit2.active_groups == res.active_groups

    def test_loaded_model_predicts_identically(self, tmp_path, fitted):
        ds, _, spec, res = fitted
        path = tmp_path / "model.json"
        fileio.save_model(path, res, spec, ds.dims)
        fit2, *_ = fileio.load_model(path)
        assert np.allclose(fit2.predict_dataset(ds), res.predict_dataset(ds),
                           atol=1e-12, rtol=0)

    def test_conformal_block_round_trip_including_infinity(self, tmp_path, fitted):
        ds, _, spec, res = fitted
        train1, train2, calib, test, _ = gen_scenario_a2(ScenarioA1Config(n=80, m=4, seed=32))
        cm = calibrate(res, train2, calib, alpha=0.01)  # tiny alpha: q_hat may be inf
        path = tmp_path / "model.json"
        fileio.save_model(path, res, spec, ds.dims, conformal=cm)
        _, _, _, conf2, _ = fileio.load_model(path)
        assert conf2.alpha == cm.alpha
        assert conf2.n_cal == cm.n_cal
        assert np.array_equal(conf2.scores, cm.scores)
        assert np.array_equal(conf2.s, cm.s)
        assert conf2.q_hat == cm.q_hat or (math.isinf(conf2.q_hat) and math.isinf(cm.q_hat))

    def test_numbers_serialized_as_decimal_text(self, tmp_path, fitted):
        ds, _, spec, res = fitted
        path = tmp_path / "model.json"
        fileio.save_model(path, res, spec, ds.dims)
        doc = json.loads(path.read_text())
        assert isinstance(doc["penalty"]["lambda"], str)
        assert isinstance(doc["coefficients"]["intercept"][0], str)
        assert isinstance(doc["basis"][0]["knots"][0], str)

    def test_rejects_foreign_document(self, tmp_path):
        path = tmp_path / "nope.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(DataError, match="not a model document"):
            fileio.load_model(path)


class TestTruthSidecar:
    def test_round_trip(self, tmp_path):
        ds, truth = gen_scenario_a1(ScenarioA1Config(n=12, m=2, seed=33))
        path = tmp_path / "truth.json"
        roles = {sid: ("train" if i % 2 else "test") for i, sid in enumerate(ds.ids)}
        fileio.save_truth(path, truth, roles, {"scenario": "a1", "n": 12})
        back, roles2, config = fileio.load_truth(path)
        assert roles2 == roles
        assert config["n"] == 12
        assert np.array_equal(back.gamma, truth.gamma)
        assert np.array_equal(back.signal, truth.signal)
        assert back.beta_funcs[0](1.0, 1.0) == pytest.approx(1.0)


class TestResolveDatasetArg:
    def test_directory_form(self, tmp_path, small_dataset):
        fileio.write_dataset(small_dataset, tmp_path / "covariates.csv",
                             tmp_path / "draws.csv")
        cov, drw = fileio.resolve_dataset_arg(tmp_path)
        assert cov.name == "covariates.csv"

    def test_prefix_form(self, tmp_path, small_dataset):
        fileio.write_dataset(small_dataset, tmp_path / "train2_covariates.csv",
                             tmp_path / "train2_draws.csv")
        cov, drw = fileio.resolve_dataset_arg(tmp_path / "train2")
        assert cov.name == "train2_covariates.csv"

    def test_missing_files_reported(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            fileio.resolve_dataset_arg(tmp_path / "absent")
