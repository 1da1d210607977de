"""Shared data model: datasets, step schedules, spectral caches, GD trajectories.

All containers are frozen after construction and safe to share across threads;
their numpy buffers are marked read-only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceFailure, DimensionMismatch, NonFiniteInput


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n x d) and response vector (length n).

    When ``has_intercept`` the last feature column is identically one.
    """

    features: np.ndarray
    response: np.ndarray
    has_intercept: bool = False

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def drop_row(self, i: int) -> "Dataset":
        """Dataset with row ``i`` removed (LOO refits)."""
        return Dataset(
            _readonly(np.delete(self.features, i, axis=0)),
            _readonly(np.delete(self.response, i)),
            self.has_intercept,
        )


@dataclass(frozen=True)
class StepSchedule:
    """GD step sizes delta_0 ... delta_{K-1}.

    Steps must be finite and nonnegative; zero steps leave the iterate
    unchanged and keep degenerate limits expressible.
    """

    deltas: np.ndarray

    def __post_init__(self):
        deltas = _readonly(np.atleast_1d(self.deltas))
        if deltas.ndim != 1 or deltas.size < 1:
            raise DimensionMismatch("schedule must be a nonempty 1-d array")
        if not np.all(np.isfinite(deltas)) or np.any(deltas < 0):
            raise NonFiniteInput("step sizes must be finite and nonnegative")
        object.__setattr__(self, "deltas", deltas)

    @classmethod
    def constant(cls, step_size: float, n_steps: int) -> "StepSchedule":
        if n_steps < 1:
            raise DimensionMismatch("n_steps must be >= 1")
        return cls(np.full(n_steps, float(step_size)))

    @property
    def n_steps(self) -> int:
        return self.deltas.size

    @property
    def total(self) -> float:
        """Sum of the step sizes (the elapsed flow time of the schedule)."""
        return float(self.deltas.sum())


@dataclass(frozen=True)
class SpectralCache:
    """Thin SVD of the feature matrix (or of X / sqrt(n) when normalized).

    ``left_vectors`` is n x m, ``right_vectors`` d x m, with m = min(n, d) and
    singular values sorted descending.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    normalized: bool
    n: int

    @property
    def gram_eigenvalues(self) -> np.ndarray:
        """Nonzero-part eigenvalues of X^T X / n, length min(n, d)."""
        s = self.singular_values
        return s**2 if self.normalized else s**2 / self.n

    def row_spectral_coords(self) -> np.ndarray:
        """Rows of X expressed in the right-singular basis: row i is V^T x_i.

        Equals U * s row-wise (times sqrt(n) for a normalized cache).
        """
        w = self.left_vectors * self.singular_values
        return w * np.sqrt(self.n) if self.normalized else w


@dataclass(frozen=True)
class GDTrajectory:
    """GD iterates beta_0 ... beta_K (rows) plus the schedule that produced them.

    ``smoother_traces`` holds tr[H_k] / n per step when it has been computed.
    """

    iterates: np.ndarray
    schedule: StepSchedule
    smoother_traces: np.ndarray | None = field(default=None)

    @property
    def n_steps(self) -> int:
        return self.iterates.shape[0] - 1

    @property
    def d(self) -> int:
        return self.iterates.shape[1]

    def with_traces(self, traces: np.ndarray) -> "GDTrajectory":
        return GDTrajectory(self.iterates, self.schedule, _readonly(traces))


def build_dataset(features, response, add_intercept: bool = False) -> Dataset:
    """Validate and assemble a Dataset, optionally appending a ones column."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or y.ndim != 1:
        raise DimensionMismatch("features must be 2-d and response 1-d")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"features have {X.shape[0]} rows but response has {y.shape[0]}"
        )
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionMismatch("need at least one row and one column")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("features and response must be finite")
    if add_intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    return Dataset(_readonly(X), _readonly(y), has_intercept=add_intercept)


def spectral_decompose(data: Dataset, normalize: bool = False) -> SpectralCache:
    """Thin SVD of X, or of X / sqrt(n) when ``normalize``.

    The squared singular values of X / sqrt(n) are the eigenvalues of the
    sample covariance X^T X / n.
    """
    X = data.features / np.sqrt(data.n) if normalize else data.features
    try:
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD failed: {exc}") from exc
    return SpectralCache(
        _readonly(U), _readonly(s), _readonly(Vt.T), bool(normalize), data.n
    )


def load_dataset_csv(
    path,
    response_column: str | int | None = None,
    header: bool | None = None,
    add_intercept: bool = False,
) -> Dataset:
    """Load a Dataset from CSV.

    The response lives in ``response_column`` (name requires a header row;
    an integer is a 0-based position; None means the last column).  With
    ``header=None`` the first row is treated as a header when it fails to
    parse as numbers.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DimensionMismatch(f"{path}: empty file")

    names = None
    first = rows[0]
    is_header = header
    if is_header is None:
        try:
            [float(v) for v in first]
            is_header = False
        except ValueError:
            is_header = True
    if is_header:
        names, rows = first, rows[1:]
    if not rows:
        raise DimensionMismatch(f"{path}: no data rows")

    try:
        table = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise NonFiniteInput(f"{path}: non-numeric entry ({exc})") from exc

    if isinstance(response_column, str):
        if names is None or response_column not in names:
            raise DimensionMismatch(
                f"{path}: response column {response_column!r} not found in header"
            )
        j = names.index(response_column)
    elif response_column is None:
        j = table.shape[1] - 1
    else:
        j = int(response_column)
    y = table[:, j]
    X = np.delete(table, j, axis=1)
    return build_dataset(X, y, add_intercept=add_intercept)
