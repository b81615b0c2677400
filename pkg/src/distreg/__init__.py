"""Regression of multivariate scalar outcomes on multidimensional
distributional predictors, with conformal hypercube prediction regions.

Subjects are observed through finite draws from a latent multivariate
distribution.  Tensor-product spline features averaged over the draws
turn the distributional effect into a linear one; a multi-task
group-penalized solver couples the outcomes; split-conformal calibration
wraps the fit in finite-sample prediction boxes.
"""

from .baselines import (
    MeanSummaryModel,
    QuantileGrid,
    SoqfrModel,
    composite_dataset,
    fit_mean_summary,
    fit_soqfr,
    fit_soqfr_cv,
    quantile_function,
)
from .bspline import BSplineBasis, eval_basis, eval_basis_batch, make_basis
from .conformal import (
    ConformalModel,
    ConstantModel,
    PredictionRegion,
    calibrate,
    contains,
    empirical_coverage,
    predict_region,
)
from .core import Dataset, Dims, SplitPlan, SubjectRecord, split, validate
from .errors import CalibrationError, DataError, DistregError, NumericalError
from .features import (
    DesignBlocks,
    TensorBasis,
    build_design,
    distributional_score,
    feature_matrix,
    pooled_training_basis,
    standardize_design,
    subject_features,
    tensor_row,
    tensor_rows,
)
from .metrics import (
    EvalReport,
    beta_l2_loss,
    export_surface,
    make_report,
    pooled_quantile_window,
    predictions_frame,
    r_squared,
)
from .simulate import (
    GroundTruth,
    ScenarioA1Config,
    gen_scenario_a1,
    gen_scenario_a2,
    split_train_test,
    true_beta,
)
from .solver import (
    FitResult,
    McpSpec,
    fit,
    group_firm_threshold,
    kkt_residuals,
    lambda_path,
    mcp_penalty,
    objective_value,
)
from .tuning import TuningGrid, TuningResult, cross_validate, fold_assignment

__version__ = "0.1.0"
