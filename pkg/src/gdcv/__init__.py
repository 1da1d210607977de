"""Risk estimation for early-stopped gradient descent on least squares.

Computes GCV and exact LOOCV along the GD path (with a fast shortcut that
avoids per-row refits), pathwise prediction intervals from LOO residuals,
and the Marchenko-Pastur limit curves that the estimators are compared
against in the proportional regime.
"""

from .data import (
    Dataset,
    GDTrajectory,
    SpectralCache,
    StepSchedule,
    build_dataset,
    load_dataset_csv,
    spectral_decompose,
)
from .estimator import EarlyStoppedGDRegressor
from .gd import (
    GDFilter,
    GFFilter,
    gradient_flow,
    run_gd,
    smoother_trace,
    smoother_trace_path,
    spectral_estimate,
)
from .loo import (
    LooShortcutState,
    cost_model,
    loo_power_state,
    loo_predictions_fast,
    loo_via_augmented,
    loocv_fast,
    ridge_loo_residuals,
)
from .asymptotics import (
    MPLaw,
    derivative_table,
    gcv_limit,
    limit_curves,
    mismatch,
    component_mismatch,
    mp_integral,
    mp_moment,
    risk_limit,
)
from .intervals import (
    CoverageReport,
    IntervalSpec,
    build_intervals,
    coverage_monte_carlo,
    error_distribution_distance,
    loo_error_quantiles,
    loo_quantile,
)
from .risk import (
    ErrorFunctional,
    RiskCurve,
    absolute_error,
    functional_loocv,
    gcv_risk,
    indicator_below,
    loocv_naive,
    loo_predictions_naive,
    squared_error,
    true_risk_closed_form,
    true_risk_monte_carlo,
    tune_by_loocv,
)
from .sim import (
    AR,
    Gaussian,
    GroundTruth,
    Isotropic,
    Linear,
    LinearPlusQuadratic,
    RandomSphere,
    SimModel,
    StudentT,
    TopEigenvector,
    generate,
    ground_truth,
    quadratic_response_component,
    sample_pairs,
)

__version__ = "0.1.0"
