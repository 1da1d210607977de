"""Risk curves along the GD path: GCV, naive LOOCV, plug-in functionals,
and the true conditional risk under a known simulation model."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset, GDTrajectory, SpectralCache, StepSchedule, spectral_decompose
from .exceptions import DimensionMismatch, EmptyInput, ModelMismatch
from .gd import run_gd, smoother_trace_path

GCV_DEGENERACY_TOL = 1e-10

RISK_LABELS = ("TrueRisk", "GCV", "LOOCV", "LOOCVShortcut", "FunctionalLOOCV")


class GCVDegeneracyWarning(UserWarning):
    """1 - tr[H_k]/n vanished at some steps; GCV recorded as +inf there."""


@dataclass(frozen=True)
class RiskCurve:
    """Risk (or estimate) per GD iteration."""

    iteration_index: np.ndarray
    values: np.ndarray
    label: str
    stderr: np.ndarray | None = None
    degenerate: np.ndarray | None = None

    def __post_init__(self):
        idx = np.asarray(self.iteration_index, dtype=int)
        vals = np.asarray(self.values, dtype=float)
        if idx.shape != vals.shape or idx.ndim != 1 or idx.size == 0:
            raise DimensionMismatch("index and values must be equal-length 1-d arrays")
        object.__setattr__(self, "iteration_index", idx)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    def to_rows(self) -> list[dict]:
        rows = []
        for j, k in enumerate(self.iteration_index):
            row = {"k": int(k), "value": self.values[j], "label": self.label}
            if self.stderr is not None:
                row["stderr"] = self.stderr[j]
            rows.append(row)
        return rows


@dataclass(frozen=True)
class ErrorFunctional:
    """Pointwise error function psi(observed, predicted) with optional
    gradient-growth constants (C, Cbar) bounding ||grad psi(u)||."""

    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str
    gradient_bound_constants: tuple[float, float] | None = None


def squared_error() -> ErrorFunctional:
    return ErrorFunctional(lambda y, u: (y - u) ** 2, "squared", (2.0, 0.0))


def absolute_error() -> ErrorFunctional:
    return ErrorFunctional(lambda y, u: np.abs(y - u), "absolute", (0.0, 1.0))


def indicator_below(threshold: float) -> ErrorFunctional:
    """psi(y, u) = 1{y - u <= threshold}: the error-CDF functional."""
    return ErrorFunctional(
        lambda y, u: ((y - u) <= threshold).astype(float),
        f"indicator_below({threshold:g})",
    )


def gcv_risk(
    data: Dataset,
    trajectory: GDTrajectory,
    cache: SpectralCache | None = None,
) -> RiskCurve:
    """GCV curve: training error divided by (1 - tr[H_k]/n)^2 per step.

    Near-interpolation steps (|1 - tr[H_k]/n| below 1e-10) are recorded as
    +inf and flagged in ``degenerate`` rather than raising; the estimate
    genuinely diverges there.
    """
    if cache is None:
        cache = spectral_decompose(data)
    traces = smoother_trace_path(cache, trajectory.schedule)
    resid = data.response[:, None] - data.features @ trajectory.iterates.T
    train_err = np.mean(resid**2, axis=0)
    denom = 1.0 - traces
    degenerate = np.abs(denom) < GCV_DEGENERACY_TOL
    values = np.empty_like(train_err)
    values[~degenerate] = train_err[~degenerate] / denom[~degenerate] ** 2
    values[degenerate] = np.inf
    if degenerate.any():
        warnings.warn(
            f"GCV denominator degenerate at {int(degenerate.sum())} step(s); "
            "recorded +inf",
            GCVDegeneracyWarning,
            stacklevel=2,
        )
    K = trajectory.n_steps
    return RiskCurve(np.arange(K + 1), values, "GCV", degenerate=degenerate)


def loo_predictions_naive(
    data: Dataset,
    schedule: StepSchedule,
    k_max: int | None = None,
) -> np.ndarray:
    """Drop-row GD refits for every row: x_i^T beta_{k,-i}, shape (n, K + 1).

    Each refit keeps the full-sample delta/n normalization so that the
    shortcut and augmented-system routes agree with it exactly.
    """
    if data.n < 2:
        raise DimensionMismatch("leave-one-out needs at least two rows")
    sched = schedule if k_max is None else StepSchedule(schedule.deltas[:k_max])
    from .gd import estimate_max_eigval

    lam_max = estimate_max_eigval(data.features, data.n)
    preds = np.empty((data.n, sched.n_steps + 1))
    for i in range(data.n):
        traj = run_gd(
            data.drop_row(i), sched, n_scale=data.n, max_eigval=lam_max
        )
        preds[i] = traj.iterates @ data.features[i]
    return preds


def loocv_naive(
    data: Dataset,
    schedule: StepSchedule,
    k_max: int | None = None,
) -> RiskCurve:
    """Exact LOOCV squared-risk curve by refitting without each row."""
    preds = loo_predictions_naive(data, schedule, k_max)
    return _plugin_curve(data.response, preds, squared_error(), "LOOCV")


def functional_loocv(
    data: Dataset,
    schedule: StepSchedule,
    k_max: int | None = None,
    psi: ErrorFunctional | None = None,
    loo_predictions: np.ndarray | None = None,
) -> RiskCurve:
    """Plug-in LOOCV estimate of a general error functional.

    Averages psi(y_i, x_i^T beta_{k,-i}) over rows per step.  Precomputed
    LOO predictions (for instance from the fast shortcut) may be supplied;
    otherwise drop-row refits are run.
    """
    if psi is None:
        psi = squared_error()
    if loo_predictions is None:
        loo_predictions = loo_predictions_naive(data, schedule, k_max)
    return _plugin_curve(data.response, loo_predictions, psi, "FunctionalLOOCV")


def _plugin_curve(y, loo_predictions, psi, label) -> RiskCurve:
    values = np.mean(psi.evaluate(y[:, None], loo_predictions), axis=0)
    return RiskCurve(np.arange(loo_predictions.shape[1]), values, label)


def true_risk_closed_form(trajectory: GDTrajectory, truth) -> RiskCurve:
    """Conditional squared risk under a known linear simulation model:
    (beta_k - beta0)^T Sigma (beta_k - beta0) + sigma^2 per step."""
    if not truth.is_linear:
        raise ModelMismatch(
            "closed-form risk needs a linear response; use true_risk_monte_carlo"
        )
    diff = trajectory.iterates - truth.beta0[None, :]
    if truth.sigma_chol is None:
        quad = np.sum(diff**2, axis=1)
    else:
        quad = np.sum((diff @ truth.sigma_chol) ** 2, axis=1)
    values = quad + truth.noise_variance
    return RiskCurve(np.arange(trajectory.n_steps + 1), values, "TrueRisk")


def true_risk_monte_carlo(
    trajectory: GDTrajectory,
    model,
    n_test: int,
    seed: int,
    psi: ErrorFunctional | None = None,
    truth=None,
) -> RiskCurve:
    """Monte Carlo conditional risk over fresh test pairs, any functional.

    Reports the empirical mean per step with its standard error.  The signal
    realization is reproduced from the model (or passed via ``truth``) so the
    risk is conditional on the same training ground truth.
    """
    from .sim import ground_truth, sample_pairs

    if n_test < 1:
        raise EmptyInput("n_test must be >= 1")
    if psi is None:
        psi = squared_error()
    if truth is None:
        truth = ground_truth(model)
    X0, y0 = sample_pairs(model, truth, n_test, seed)
    errors_input = psi.evaluate(y0[:, None], X0 @ trajectory.iterates.T)
    values = errors_input.mean(axis=0)
    stderr = errors_input.std(axis=0, ddof=1) / np.sqrt(n_test)
    return RiskCurve(
        np.arange(trajectory.n_steps + 1), values, "TrueRisk", stderr=stderr
    )


def tune_by_loocv(curve: RiskCurve) -> int:
    """Index k* minimizing the curve; ties break toward the smallest k."""
    if len(curve) == 0:
        raise EmptyInput("empty risk curve")
    return int(curve.iteration_index[int(np.argmin(curve.values))])
