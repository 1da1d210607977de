"""Gradient descent on the least-squares objective and its spectral filters.

The objective is ||y - X b||^2 / (2n); one GD step with step size delta is

    b_{k+1} = b_k + (delta_k / n) X^T (y - X b_k).

After k steps the fitted values are a linear smoother of y whose eigenvalue
filter is g(x) = 1 - prod_j (1 - delta_j x) applied to the eigenvalues of
X^T X / n; gradient flow (the small-step limit at elapsed time T) uses
g(x) = 1 - exp(-T x).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, GDTrajectory, SpectralCache, StepSchedule, _readonly
from .exceptions import DimensionMismatch

STABILITY_LIMIT = 2.0


class StepSizeWarning(UserWarning):
    """Step sizes reach the divergent regime (delta * lambda_max >= 2)."""


@dataclass(frozen=True)
class GDFilter:
    """Eigenvalue filter of the k-step GD smoother for a step schedule."""

    deltas: np.ndarray

    def g(self, x):
        x = np.asarray(x, dtype=float)
        prod = np.ones_like(x)
        for d in np.atleast_1d(self.deltas):
            prod = prod * (1.0 - d * x)
        return 1.0 - prod

    def g_sum_form(self, x):
        """Rolled-out form sum_j delta_j x prod_{r>j} (1 - delta_r x)."""
        x = np.asarray(x, dtype=float)
        deltas = np.atleast_1d(self.deltas)
        total = np.zeros_like(x)
        suffix = np.ones_like(x)
        for d in deltas[::-1]:
            total = total + d * x * suffix
            suffix = suffix * (1.0 - d * x)
        return total

    def gbar(self, x):
        """g(x) / x with the continuous extension sum(deltas) at x = 0."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        nz = x != 0
        out[nz] = self.g(x[nz]) / x[nz]
        out[~nz] = float(np.sum(self.deltas))
        return out


@dataclass(frozen=True)
class GFFilter:
    """Eigenvalue filter of the gradient-flow smoother at elapsed time T."""

    time: float

    def g(self, x):
        return -np.expm1(-self.time * np.asarray(x, dtype=float))

    def gbar(self, x):
        """g(x) / x with the continuous extension T at x = 0."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        nz = x != 0
        out[nz] = -np.expm1(-self.time * x[nz]) / x[nz]
        out[~nz] = self.time
        return out


def estimate_max_eigval(X: np.ndarray, n_scale: int, n_iter: int = 30) -> float:
    """Power-iteration estimate of the top eigenvalue of X^T X / n_scale."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(X.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = X @ (X.T @ v) / n_scale
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def run_gd(
    data: Dataset,
    schedule: StepSchedule,
    init: np.ndarray | None = None,
    *,
    n_scale: int | None = None,
    max_eigval: float | None = None,
) -> GDTrajectory:
    """Run GD on the least-squares objective; returns all K + 1 iterates.

    ``n_scale`` is the row count in the delta/n normalization and defaults to
    the dataset's own; leave-one-out refits pass the full-sample count so the
    drop-row path shares the full fit's normalization.  ``max_eigval`` is an
    optional known top eigenvalue of X^T X / n_scale used for the divergence
    warning (estimated when omitted).
    """
    X, y = data.features, data.response
    n, d = X.shape
    ns = n if n_scale is None else int(n_scale)
    if init is None:
        b = np.zeros(d)
    else:
        b = np.asarray(init, dtype=float).copy()
        if b.shape != (d,):
            raise DimensionMismatch(f"init has shape {b.shape}, expected ({d},)")

    lam_max = estimate_max_eigval(X, ns) if max_eigval is None else float(max_eigval)
    if float(np.max(schedule.deltas)) * lam_max >= STABILITY_LIMIT:
        warnings.warn(
            "largest step size reaches the divergent regime "
            f"(delta * lambda_max = {float(np.max(schedule.deltas)) * lam_max:.3g} >= 2)",
            StepSizeWarning,
            stacklevel=2,
        )

    K = schedule.n_steps
    iterates = np.empty((K + 1, d))
    iterates[0] = b
    for k, delta in enumerate(schedule.deltas):
        b = b + (delta / ns) * (X.T @ (y - X @ b))
        iterates[k + 1] = b
    return GDTrajectory(_readonly(iterates), schedule)


def smoother_trace(cache: SpectralCache, filt) -> float:
    """tr[H] / n for the smoother with eigenvalue filter ``filt``.

    Zero eigenvalues contribute g(0) = 0, so summing over the min(n, d)
    retained values is exact.
    """
    return float(np.sum(filt.g(cache.gram_eigenvalues))) / cache.n


def smoother_trace_path(cache: SpectralCache, schedule: StepSchedule) -> np.ndarray:
    """tr[H_k] / n for k = 0 ... K in one pass of cumulative products."""
    lam = cache.gram_eigenvalues
    traces = np.empty(schedule.n_steps + 1)
    traces[0] = 0.0
    prod = np.ones_like(lam)
    for k, delta in enumerate(schedule.deltas):
        prod *= 1.0 - delta * lam
        traces[k + 1] = float(np.sum(1.0 - prod)) / cache.n
    return traces


def spectral_estimate(cache: SpectralCache, data: Dataset, filt) -> np.ndarray:
    """Closed-form estimate V diag(gbar(lam)) V^T X^T y / n for any filter."""
    lam = cache.gram_eigenvalues
    c = cache.left_vectors.T @ data.response
    scale = filt.gbar(lam) * np.sqrt(lam / cache.n)
    return cache.right_vectors @ (scale * c)


def gradient_flow(cache: SpectralCache, data: Dataset, time: float) -> np.ndarray:
    """Gradient-flow coefficients at elapsed time T >= 0.

    Evaluates the spectral closed form of the flow ODE solution; the zero
    eigenvalue uses the continuous extension gbar(0) = T, which matters in
    the rank-deficient (overparameterized) case.
    """
    if not np.isfinite(time) or time < 0:
        raise DimensionMismatch("time must be finite and nonnegative")
    return spectral_estimate(cache, data, GFFilter(time))
