"""Exact leave-one-out predictions along the GD path without per-row refits.

Two equivalent routes are provided:

* ``loo_via_augmented``: run GD on the full feature matrix while the held-out
  response entry is replaced, at every step, by the current LOO prediction.
  This reproduces drop-row GD exactly and serves as a correctness oracle.

* ``loocv_fast``: evolve, for all rows at once, the correction
  d_{i,k} = beta_{k,-i} - beta_k.  Subtracting the two GD recursions gives

      d_{i,k+1} = (I - (delta_k / n) X^T X) d_{i,k}
                  + (delta_k / n) (x_i^T beta_{k,-i} - y_i) x_i,

  a linear recursion with a rank-one source along x_i.  Because x_i lies in
  the row space of X, the recursion diagonalizes in the right-singular basis,
  where every multiplier is 1 - delta_k * lambda; in the convergent regime
  all factors are at most one, so the evaluation is forward-stable in k.

Expanding the same recursion in powers of the Gram matrix yields the
coefficient form

    x_i^T beta_{k,-i} = x_i^T beta_k + A_{i,k} ||x_i||^2
                        + sum_{j=1}^{k-1} B_{i,k}^{(j)} x_i^T (X^T X)^j x_i,

exposed by ``loo_power_state``.  The power-basis coefficients alternate in
sign and grow like (1 + delta * n * lambda_max)^k, so evaluating that display
literally is exponentially ill-conditioned in k; it is kept as a secondary
small-k oracle while ``loocv_fast`` is the production path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, GDTrajectory, SpectralCache, StepSchedule, spectral_decompose
from .exceptions import (
    DimensionMismatch,
    MemoryBudgetExceeded,
    PowerOverflow,
    SingularSystem,
)
from .gd import run_gd
from .risk import RiskCurve

OVERFLOW_LIMIT = 1e300

# default ceiling on n * K^2 / 2 stored B coefficients (~400 MB of float64)
DEFAULT_B_BUDGET = 50_000_000


def loo_predictions_fast(
    data: Dataset,
    schedule: StepSchedule,
    cache: SpectralCache | None = None,
    trajectory: GDTrajectory | None = None,
) -> np.ndarray:
    """Exact LOO predictions x_i^T beta_{k,-i}, shape (n, K + 1).

    Shares one SVD and one full GD path across all n held-out rows; total
    cost is O(n^2 min(n, d)) for the decomposition plus O(n min(n, d)) per
    step.
    """
    if data.n < 2:
        raise DimensionMismatch("leave-one-out needs at least two rows")
    X, y, n = data.features, data.response, data.n
    if cache is None:
        cache = spectral_decompose(data)
    lam = cache.gram_eigenvalues
    W = cache.row_spectral_coords()
    if trajectory is None:
        trajectory = run_gd(data, schedule, max_eigval=float(lam[0]))
    elif trajectory.n_steps != schedule.n_steps:
        raise DimensionMismatch(
            f"trajectory has {trajectory.n_steps} steps, schedule {schedule.n_steps}"
        )
    full_preds = X @ trajectory.iterates.T  # (n, K + 1)

    K = schedule.n_steps
    preds = np.empty((n, K + 1))
    preds[:, 0] = full_preds[:, 0]
    E = np.zeros_like(W)
    for k, delta in enumerate(schedule.deltas):
        source = (delta / n) * (preds[:, k] - y)
        E *= 1.0 - delta * lam
        E += source[:, None] * W
        preds[:, k + 1] = full_preds[:, k + 1] + np.einsum("im,im->i", E, W)
        col_max = np.max(np.abs(preds[:, k + 1]))
        if not np.isfinite(col_max) or col_max > OVERFLOW_LIMIT:
            raise PowerOverflow(
                f"LOO predictions exceeded {OVERFLOW_LIMIT:g} at step {k + 1}; "
                "the step schedule is divergent"
            )
    return preds


def loocv_fast(
    data: Dataset,
    schedule: StepSchedule,
    k_max: int | None = None,
    cache: SpectralCache | None = None,
) -> tuple[RiskCurve, np.ndarray]:
    """LOOCV squared-risk curve via the shortcut; also returns the per-row
    LOO predictions (n, k_max + 1)."""
    sched = _truncate(schedule, k_max)
    preds = loo_predictions_fast(data, sched, cache=cache)
    values = np.mean((data.response[:, None] - preds) ** 2, axis=0)
    curve = RiskCurve(np.arange(sched.n_steps + 1), values, "LOOCVShortcut")
    return curve, preds


def loo_via_augmented(
    data: Dataset,
    schedule: StepSchedule,
    i: int,
    k_max: int | None = None,
) -> np.ndarray:
    """LOO predictions for row ``i`` through the modified augmented system.

    GD runs on the full X; before every step the i-th response entry is
    overwritten with the current iterate's prediction for row i, which zeroes
    that row's contribution to the gradient and hence reproduces drop-row GD
    exactly.
    """
    if data.n < 2:
        raise DimensionMismatch("leave-one-out needs at least two rows")
    if not 0 <= i < data.n:
        raise DimensionMismatch(f"row index {i} out of range [0, {data.n})")
    sched = _truncate(schedule, k_max)
    X, n = data.features, data.n
    x_i = X[i]
    beta = np.zeros(data.d)
    y_aug = data.response.copy()
    preds = np.empty(sched.n_steps + 1)
    preds[0] = x_i @ beta
    for k, delta in enumerate(sched.deltas):
        y_aug[i] = x_i @ beta
        beta = beta + (delta / n) * (X.T @ (y_aug - X @ beta))
        preds[k + 1] = x_i @ beta
    return preds


@dataclass(frozen=True)
class LooShortcutState:
    """Power-basis form of the LOO corrections.

    ``A`` has shape (n, K + 1); ``B[k]`` has shape (n, k - 1) holding
    B_{i,k}^(j) for j = 1 ... k-1 (B_{i,k}^(k) is zero by convention and not
    stored).  ``H_quad`` column j holds x_i^T (X^T X)^j x_i for j = 0 ... K-1,
    so column 0 is ||x_i||^2.
    """

    A: np.ndarray
    B: list[np.ndarray]
    H_quad: np.ndarray
    schedule: StepSchedule

    @property
    def n_steps(self) -> int:
        return self.A.shape[1] - 1

    def corrections(self) -> np.ndarray:
        """A_{i,k} ||x_i||^2 + sum_j B_{i,k}^(j) H_{ij}, shape (n, K + 1)."""
        n, K = self.A.shape[0], self.n_steps
        out = np.zeros((n, K + 1))
        for k in range(K + 1):
            out[:, k] = self.A[:, k] * self.H_quad[:, 0]
            if k >= 2:
                terms = self.B[k] * self.H_quad[:, 1:k]
                peak = np.max(np.abs(terms)) if terms.size else 0.0
                if not np.isfinite(peak) or peak > OVERFLOW_LIMIT:
                    raise PowerOverflow(
                        f"|B * H| exceeded {OVERFLOW_LIMIT:g} at step {k}"
                    )
                out[:, k] += terms.sum(axis=1)
        return out

    def predictions(self, data: Dataset, trajectory: GDTrajectory) -> np.ndarray:
        """LOO predictions from the coefficient display, shape (n, K + 1)."""
        return data.features @ trajectory.iterates.T + self.corrections()


def gram_power_quadforms(cache: SpectralCache, n_powers: int) -> np.ndarray:
    """x_i^T (X^T X)^j x_i for j = 0 ... n_powers - 1 via the spectral cache.

    Column j equals sum_m s_m^(2j + 2) U_im^2; values that leave float64
    range raise PowerOverflow.
    """
    W2 = cache.row_spectral_coords() ** 2
    lam_gram = cache.gram_eigenvalues * cache.n  # eigenvalues of X^T X
    out = np.empty((W2.shape[0], n_powers))
    powers = np.ones_like(lam_gram)
    with np.errstate(over="raise"):
        try:
            for j in range(n_powers):
                out[:, j] = W2 @ powers
                if j + 1 < n_powers:
                    powers = powers * lam_gram
        except FloatingPointError as exc:
            raise PowerOverflow(
                f"Gram power {j + 1} overflowed float64 range"
            ) from exc
    return out


def loo_power_state(
    data: Dataset,
    schedule: StepSchedule,
    k_max: int | None = None,
    cache: SpectralCache | None = None,
    max_b_entries: int = DEFAULT_B_BUDGET,
) -> LooShortcutState:
    """Run the coefficient recursions and keep the full A / B history.

    Memory is O(n K^2 / 2) for the B history; the builder refuses to start
    when that exceeds ``max_b_entries``.
    """
    if data.n < 2:
        raise DimensionMismatch("leave-one-out needs at least two rows")
    sched = _truncate(schedule, k_max)
    n, K = data.n, sched.n_steps
    if n * K * K // 2 > max_b_entries:
        raise MemoryBudgetExceeded(
            f"n * K^2 / 2 = {n * K * K // 2} B coefficients exceed the "
            f"budget of {max_b_entries}; raise max_b_entries to override"
        )
    if cache is None:
        cache = spectral_decompose(data)
    H = gram_power_quadforms(cache, max(K, 1))
    trajectory = run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
    full_preds = data.features @ trajectory.iterates.T
    y = data.response

    A = np.zeros((n, K + 1))
    B: list[np.ndarray] = [np.zeros((n, 0)), np.zeros((n, 0))]
    for k in range(K):
        delta = sched.deltas[k]
        c = delta / n
        Bk = B[k] if k >= 1 else np.zeros((n, 0))
        correction = A[:, k] * H[:, 0]
        if k >= 2:
            correction = correction + np.sum(Bk * H[:, 1:k], axis=1)
        A[:, k + 1] = A[:, k] + c * (correction + full_preds[:, k] - y)
        if k >= 1:
            Bnext = np.zeros((n, k))
            Bnext[:, 0] = -c * A[:, k]
            if k >= 2:
                Bnext[:, 0] += Bk[:, 0]
                Bnext[:, 1 : k - 1] = Bk[:, 1 : k - 1] - c * Bk[:, 0 : k - 2]
                # B_{i,k}^(k) = 0 enters the last new column implicitly
                Bnext[:, k - 1] = -c * Bk[:, k - 2]
            B.append(Bnext)
    return LooShortcutState(A, B, H, sched)


def ridge_loo_residuals(data: Dataset, ridge_penalty: float) -> np.ndarray:
    """LOO residuals of ridge regression from the classical shortcut.

    Fits min ||y - X b||^2 + penalty ||b||^2 and returns
    (y_i - x_i^T beta) / (1 - H_ii) without refitting.  penalty = 0 is
    allowed only for full-column-rank X.
    """
    if ridge_penalty < 0:
        raise SingularSystem("ridge penalty must be nonnegative")
    cache = spectral_decompose(data)
    s2 = cache.singular_values**2
    if ridge_penalty == 0 and (
        data.d > data.n or s2[-1] <= s2[0] * 1e-12 or s2[-1] == 0
    ):
        raise SingularSystem("penalty 0 requires full column rank")
    shrink = s2 / (s2 + ridge_penalty)
    U = cache.left_vectors
    fitted = U @ (shrink * (U.T @ data.response))
    h_diag = (U**2) @ shrink
    denom = 1.0 - h_diag
    if np.any(np.abs(denom) < 1e-12):
        raise SingularSystem("1 - H_ii is numerically zero")
    return (data.response - fitted) / denom


def cost_model(n: int, p: int, k: int) -> tuple[float, float]:
    """Leading-order flop counts (naive refits, shortcut) for n = p regimes.

    Naive LOOCV runs n GD paths of k steps, each step two matrix-vector
    products: about 4 n^2 k flops per row, so c1 * n^3 * k with c1 = 4.
    The shortcut pays one SVD (~14 n^3), the shared GD path and spectral
    tables (~3 n^2 k), and the per-step correction updates (~3 n k^2).
    """
    if min(n, p, k) <= 0:
        raise DimensionMismatch("n, p, k must be positive")
    naive = 4.0 * n**2 * p * k
    shortcut = 14.0 * n**2 * p + 3.0 * n * p * k + 3.0 * n * k**2
    return naive, shortcut


def _truncate(schedule: StepSchedule, k_max: int | None) -> StepSchedule:
    if k_max is None or k_max == schedule.n_steps:
        return schedule
    if not 1 <= k_max <= schedule.n_steps:
        raise DimensionMismatch(
            f"k_max = {k_max} outside [1, {schedule.n_steps}]"
        )
    return StepSchedule(schedule.deltas[:k_max])
