"""Pathwise prediction intervals from LOO residual quantiles, and Monte Carlo
measurement of their conditional coverage."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp

from .data import GDTrajectory
from .exceptions import DimensionMismatch, EmptyInput


@dataclass(frozen=True)
class IntervalSpec:
    """Pair of quantile levels; nominal coverage is q2 - q1."""

    q1: float
    q2: float

    def __post_init__(self):
        if not 0.0 <= self.q1 <= self.q2 <= 1.0:
            raise DimensionMismatch("need 0 <= q1 <= q2 <= 1")

    @property
    def nominal(self) -> float:
        return self.q2 - self.q1

    @classmethod
    def central(cls, level: float) -> "IntervalSpec":
        """Equal-tailed spec with the given nominal coverage."""
        if not 0.0 <= level <= 1.0:
            raise DimensionMismatch("level must be in [0, 1]")
        alpha = (1.0 - level) / 2.0
        return cls(alpha, 1.0 - alpha)


def loo_quantile(residuals, q: float) -> float:
    """Order-statistic quantile: the ceil(q n)-th smallest value (q = 0 gives
    the minimum).  Deterministic and permutation-invariant."""
    r = np.sort(np.asarray(residuals, dtype=float))
    if r.size == 0:
        raise EmptyInput("no residuals")
    if not 0.0 <= q <= 1.0:
        raise DimensionMismatch("quantile level must be in [0, 1]")
    idx = max(int(np.ceil(q * r.size)), 1)
    return float(r[idx - 1])


def loo_error_quantiles(loo_errors: np.ndarray, spec: IntervalSpec,
                        ks=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-step interval endpoints [alpha_k(q1), alpha_k(q2)].

    ``loo_errors`` has one column per GD step (entries y_i - x_i^T b_{k,-i});
    ``ks`` selects recorded steps (default: all columns).  Returns (ks,
    bounds) with bounds of shape (len(ks), 2).
    """
    loo_errors = np.asarray(loo_errors, dtype=float)
    if loo_errors.ndim != 2 or loo_errors.size == 0:
        raise EmptyInput("loo_errors must be a nonempty (n, K+1) array")
    if ks is None:
        ks = np.arange(loo_errors.shape[1])
    ks = np.asarray(ks, dtype=int)
    bounds = np.empty((ks.size, 2))
    for j, k in enumerate(ks):
        col = loo_errors[:, k]
        bounds[j, 0] = loo_quantile(col, spec.q1)
        bounds[j, 1] = loo_quantile(col, spec.q2)
    return ks, bounds


@dataclass(frozen=True)
class PathIntervals:
    """Prediction intervals for new points at the recorded steps."""

    ks: np.ndarray
    bounds: np.ndarray            # (n_k, 2) LOO-error quantile pairs
    lower: np.ndarray             # (n_new, n_k)
    upper: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return self.bounds[:, 1] - self.bounds[:, 0]


def build_intervals(loo_errors: np.ndarray, spec: IntervalSpec,
                    trajectory: GDTrajectory, x_new, ks=None) -> PathIntervals:
    """Intervals x0^T b_k + [alpha_k(q1), alpha_k(q2)] at the recorded steps.

    The shift attaches to the full-model prediction (the coverage event is
    about y_new - x_new^T b_k), not to LOO predictions.
    """
    ks, bounds = loo_error_quantiles(loo_errors, spec, ks)
    X0 = np.atleast_2d(np.asarray(x_new, dtype=float))
    if X0.shape[1] != trajectory.d:
        raise DimensionMismatch(
            f"x_new has {X0.shape[1]} columns, trajectory dimension is {trajectory.d}"
        )
    center = X0 @ trajectory.iterates[ks].T      # (n_new, n_k)
    return PathIntervals(ks, bounds, center + bounds[:, 0], center + bounds[:, 1])


@dataclass(frozen=True)
class CoverageReport:
    """Empirical conditional coverage of the step-wise intervals."""

    ks: np.ndarray
    nominal: float
    coverage: np.ndarray
    stderr: np.ndarray
    mean_length: np.ndarray
    n_test: int

    def to_rows(self) -> list[dict]:
        return [
            {
                "k": int(k),
                "nominal": self.nominal,
                "coverage": self.coverage[j],
                "stderr": self.stderr[j],
                "mean_length": self.mean_length[j],
            }
            for j, k in enumerate(self.ks)
        ]


def coverage_monte_carlo(bounds: np.ndarray, ks, trajectory: GDTrajectory,
                         model, n_test: int, seed: int, spec: IntervalSpec,
                         truth=None) -> CoverageReport:
    """Fraction of fresh test pairs with y0 - x0^T b_k inside the interval.

    Draws ``n_test`` pairs from the model (conditional on the realized
    signal) and reports per-step coverage with binomial standard errors.
    """
    from .sim import ground_truth, sample_pairs

    if n_test < 100:
        raise EmptyInput("coverage needs n_test >= 100")
    if truth is None:
        truth = ground_truth(model)
    ks = np.asarray(ks, dtype=int)
    bounds = np.asarray(bounds, dtype=float)
    X0, y0 = sample_pairs(model, truth, n_test, seed)
    errors = y0[:, None] - X0 @ trajectory.iterates[ks].T   # (n_test, n_k)
    inside = (errors >= bounds[None, :, 0]) & (errors <= bounds[None, :, 1])
    coverage = inside.mean(axis=0)
    stderr = np.sqrt(np.clip(coverage * (1.0 - coverage), 0.0, None) / n_test)
    lengths = bounds[:, 1] - bounds[:, 0]
    return CoverageReport(ks, spec.nominal, coverage, stderr, lengths, n_test)


def error_distribution_distance(loo_errors_at_k, test_errors_at_k) -> float:
    """Two-sample Kolmogorov-Smirnov statistic between LOO errors and fresh
    test errors at one step; 0 for identical samples, 1 for disjoint support."""
    a = np.asarray(loo_errors_at_k, dtype=float)
    b = np.asarray(test_errors_at_k, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptyInput("both samples must be nonempty")
    return float(ks_2samp(a, b, method="asymp").statistic)
