"""File formats: two-file CSV datasets and the versioned model document.

Datasets travel as a pair of UTF-8 comma-separated files with ``.``
decimals and no thousands separators:

* ``covariates.csv`` — header ``subject_id,x1..xq,y1..yK``, one row per
  subject (q may be zero, in which case only the y columns appear).
* ``draws.csv`` — header ``subject_id,z1..zd``, long format with one row
  per draw, so per-subject draw counts may differ.

Models persist as a versioned human-readable JSON document.  Every
numeric field is decimal text with 17 significant digits, which
round-trips float64 exactly; auditability of fitted coefficients beats
compactness here.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

from .bspline import BSplineBasis
from .conformal import ConformalModel
from .core import Dataset, Dims, SubjectRecord, validate
from .errors import DataError
from .features import Standardization, TensorBasis
from .solver import FitResult, McpSpec

MODEL_FORMAT = "distreg-model"
TRUTH_FORMAT = "distreg-truth"
FILE_VERSION = 1


def _fmt(value: float) -> str:
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def _fmt_vec(values) -> list[str]:
    return [_fmt(v) for v in np.asarray(values, dtype=float).ravel()]


def _fmt_mat(values) -> list[list[str]]:
    return [[_fmt(v) for v in row] for row in np.asarray(values, dtype=float)]


def _parse_vec(values) -> np.ndarray:
    return np.array([float(v) for v in values])


def _parse_mat(values) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in values])


# ---------------------------------------------------------------------------
# dataset CSV
# ---------------------------------------------------------------------------

def _expect_header(actual: list[str], expected: list[str], path) -> None:
    if actual != expected:
        raise DataError(
            f"{path}, line 1: header {actual!r} does not match expected {expected!r}"
        )


def _parse_float(token: str, path, line_no: int, column: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(
            f"{path}, line {line_no}: column {column!r} has non-numeric value {token!r}"
        ) from None


def write_dataset(dataset: Dataset, covariates_path, draws_path) -> None:
    """Write a dataset to the two-file CSV format (floats as shortest repr)."""
    k, q, d = dataset.dims
    with open(covariates_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["subject_id"] + [f"x{j + 1}" for j in range(q)] + [f"y{j + 1}" for j in range(k)]
        )
        for s in dataset.subjects:
            writer.writerow([s.id] + [repr(float(v)) for v in s.x] + [repr(float(v)) for v in s.y])
    with open(draws_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id"] + [f"z{j + 1}" for j in range(d)])
        for s in dataset.subjects:
            for row in s.z_samples:
                writer.writerow([s.id] + [repr(float(v)) for v in row])


def read_dataset(covariates_path, draws_path) -> Dataset:
    """Read and validate a dataset, reporting schema violations with line numbers."""
    cov_rows: list[tuple[str, np.ndarray, np.ndarray]] = []
    with open(covariates_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{covariates_path}: file is empty") from None
        if not header or header[0] != "subject_id":
            raise DataError(f"{covariates_path}, line 1: first column must be 'subject_id'")
        q = sum(1 for name in header[1:] if name.startswith("x"))
        k = len(header) - 1 - q
        if k < 1:
            raise DataError(f"{covariates_path}, line 1: needs at least one y column")
        _expect_header(
            header,
            ["subject_id"] + [f"x{j + 1}" for j in range(q)] + [f"y{j + 1}" for j in range(k)],
            covariates_path,
        )
        seen = set()
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{covariates_path}, line {line_no}: expected {len(header)} fields, "
                    f"got {len(row)}"
                )
            sid = row[0]
            if sid in seen:
                raise DataError(
                    f"{covariates_path}, line {line_no}: duplicate subject id {sid!r}"
                )
            seen.add(sid)
            x = np.array([
                _parse_float(row[1 + j], covariates_path, line_no, f"x{j + 1}")
                for j in range(q)
            ])
            y = np.array([
                _parse_float(row[1 + q + j], covariates_path, line_no, f"y{j + 1}")
                for j in range(k)
            ])
            cov_rows.append((sid, x, y))
    if not cov_rows:
        raise DataError(f"{covariates_path}: no subject rows")

    draws: dict[str, list[list[float]]] = {sid: [] for sid, _, _ in cov_rows}
    with open(draws_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{draws_path}: file is empty") from None
        d = len(header) - 1
        if d < 1:
            raise DataError(f"{draws_path}, line 1: needs at least one z column")
        _expect_header(header, ["subject_id"] + [f"z{j + 1}" for j in range(d)], draws_path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise DataError(
                    f"{draws_path}, line {line_no}: expected {d + 1} fields, got {len(row)}"
                )
            sid = row[0]
            if sid not in draws:
                raise DataError(
                    f"{draws_path}, line {line_no}: unknown subject id {sid!r}"
                )
            draws[sid].append([
                _parse_float(row[1 + j], draws_path, line_no, f"z{j + 1}") for j in range(d)
            ])

    subjects = []
    for sid, x, y in cov_rows:
        if not draws[sid]:
            raise DataError(f"{draws_path}: subject {sid!r} has no draw rows")
        subjects.append(SubjectRecord(id=sid, y=y, x=x, z_samples=np.array(draws[sid])))
    dataset = Dataset(tuple(subjects), Dims(k, q, d))
    validate(dataset)
    return dataset


def resolve_dataset_arg(path_or_prefix) -> tuple[Path, Path]:
    """Resolve a dataset argument to its (covariates, draws) file pair.

    A directory resolves to ``<dir>/covariates.csv`` + ``<dir>/draws.csv``;
    anything else is a prefix resolving to ``<prefix>_covariates.csv`` +
    ``<prefix>_draws.csv``.
    """
    p = Path(path_or_prefix)
    if p.is_dir():
        pair = p / "covariates.csv", p / "draws.csv"
    else:
        pair = p.parent / f"{p.name}_covariates.csv", p.parent / f"{p.name}_draws.csv"
    for f in pair:
        if not f.is_file():
            raise DataError(f"dataset file {f} not found")
    return pair


# ---------------------------------------------------------------------------
# model document
# ---------------------------------------------------------------------------

def _basis_to_doc(basis: BSplineBasis) -> dict:
    return {
        "degree": basis.degree,
        "n_basis": basis.n_basis,
        "knots": _fmt_vec(basis.knots),
    }


def _basis_from_doc(doc: dict) -> BSplineBasis:
    return BSplineBasis(
        degree=int(doc["degree"]),
        knots=_parse_vec(doc["knots"]),
        n_basis=int(doc["n_basis"]),
    )


def save_model(
    path,
    fit: FitResult,
    spec: McpSpec,
    dims: Dims,
    conformal: ConformalModel | None = None,
    surface_window=None,
) -> None:
    """Persist a fitted model (optionally conformal-calibrated) as JSON text."""
    std = fit.standardization
    doc = {
        "format": MODEL_FORMAT,
        "version": FILE_VERSION,
        "dims": {
            "n_outcomes": dims.n_outcomes,
            "n_covariates": dims.n_covariates,
            "n_draw_dims": dims.n_draw_dims,
        },
        "basis": [_basis_to_doc(b) for b in fit.basis.bases],
        "penalty": {"lambda": _fmt(spec.lam), "phi": _fmt(spec.phi)},
        "coefficients": {
            "intercept": _fmt_vec(fit.intercept),
            "covariate": _fmt_mat(fit.gamma),
            "surface": _fmt_mat(fit.theta),
        },
        "standardization": {
            "w_center": _fmt_vec(std.w_center),
            "w_scale": _fmt_vec(std.w_scale),
            "x_center": _fmt_vec(std.x_center),
            "x_scale": _fmt_vec(std.x_scale),
            "y_center": _fmt_vec(std.y_center),
            "active": [bool(v) for v in std.active],
        },
        "surface_window": None if surface_window is None else _fmt_mat(surface_window),
        "fit_info": {
            "objective": _fmt(fit.objective),
            "iterations": fit.iterations,
            "converged": fit.converged,
            "active_groups": sorted(fit.active_groups),
        },
        "conformal": None,
    }
    if conformal is not None:
        doc["conformal"] = {
            "s": _fmt_vec(conformal.s),
            "scores": _fmt_vec(conformal.scores),
            "alpha": _fmt(conformal.alpha),
            "q_hat": _fmt(conformal.q_hat),
            "n_cal": conformal.n_cal,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Load a model document; returns (fit, spec, dims, conformal, surface_window)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not a model document")
    if doc.get("version") != FILE_VERSION:
        raise DataError(f"{path}: unsupported model version {doc.get('version')!r}")

    dims = Dims(
        int(doc["dims"]["n_outcomes"]),
        int(doc["dims"]["n_covariates"]),
        int(doc["dims"]["n_draw_dims"]),
    )
    basis = TensorBasis(tuple(_basis_from_doc(b) for b in doc["basis"]))
    spec = McpSpec(lam=float(doc["penalty"]["lambda"]), phi=float(doc["penalty"]["phi"]))

    std_doc = doc["standardization"]
    std = Standardization(
        w_center=_parse_vec(std_doc["w_center"]),
        w_scale=_parse_vec(std_doc["w_scale"]),
        x_center=_parse_vec(std_doc["x_center"]),
        x_scale=_parse_vec(std_doc["x_scale"]),
        y_center=_parse_vec(std_doc["y_center"]),
        active=np.array([bool(v) for v in std_doc["active"]]),
    )

    theta = _parse_mat(doc["coefficients"]["surface"])
    gamma = _parse_mat(doc["coefficients"]["covariate"]).reshape(dims.n_covariates, dims.n_outcomes)
    intercept = _parse_vec(doc["coefficients"]["intercept"])

    fit_info = doc["fit_info"]
    fit = FitResult(
        gamma=gamma,
        intercept=intercept,
        theta=theta,
        theta_std=theta * std.w_scale[:, None],
        gamma_std=gamma * std.x_scale[:, None] if gamma.size else gamma,
        intercept_std=intercept - std.y_center
        + (std.x_center @ gamma if gamma.size else 0.0)
        + std.w_center @ theta,
        basis=basis,
        standardization=std,
        active_groups=frozenset(int(v) for v in fit_info["active_groups"]),
        objective=float(fit_info["objective"]),
        iterations=int(fit_info["iterations"]),
        converged=bool(fit_info["converged"]),
    )

    conf = None
    if doc.get("conformal") is not None:
        c = doc["conformal"]
        conf = ConformalModel(
            fit=fit,
            s=_parse_vec(c["s"]),
            scores=_parse_vec(c["scores"]),
            alpha=float(c["alpha"]),
            q_hat=float(c["q_hat"]),
            n_cal=int(c["n_cal"]),
        )

    window = doc.get("surface_window")
    window = None if window is None else _parse_mat(window)
    return fit, spec, dims, conf, window


# ---------------------------------------------------------------------------
# ground-truth sidecar
# ---------------------------------------------------------------------------

def save_truth(path, truth, roles: dict[str, str], config: dict) -> None:
    """Persist the generator's ground truth plus subset roles as JSON."""
    doc = {
        "format": TRUTH_FORMAT,
        "version": FILE_VERSION,
        "scenario": truth.scenario,
        "gamma": _fmt_mat(truth.gamma),
        "signal": {sid: _fmt_vec(row) for sid, row in zip(truth.subject_ids, truth.signal)},
        "roles": roles,
        "config": config,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_truth(path):
    """Load a truth sidecar; returns (GroundTruth, roles, config)."""
    from .simulate import GroundTruth, true_beta

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != TRUTH_FORMAT:
        raise DataError(f"{path}: not a ground-truth document")
    ids = tuple(doc["signal"].keys())
    truth = GroundTruth(
        scenario=doc["scenario"],
        gamma=_parse_mat(doc["gamma"]),
        beta_funcs=(lambda u, v: true_beta(0, u, v), lambda u, v: true_beta(1, u, v)),
        subject_ids=ids,
        signal=np.array([_parse_vec(doc["signal"][sid]) for sid in ids]),
    )
    return truth, doc.get("roles", {}), doc.get("config", {})
