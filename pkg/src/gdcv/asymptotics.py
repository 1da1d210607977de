"""Marchenko-Pastur integrals and the limiting risk / GCV curves of the
proportional regime, including the mismatch function whose nonvanishing is
the computational content of the GCV inconsistency.

Aspect ratio zeta is the limit of p / n.  The law has density
sqrt((b - s)(s - a)) / (2 pi zeta s) on [a, b] with a = (1 - sqrt(zeta))^2,
b = (1 + sqrt(zeta))^2, plus a point mass 1 - 1/zeta at zero when zeta > 1.
Quadrature runs after the substitution s = mid + half * sin(theta), which
removes the square-root endpoint singularities (and the 1/s blow-up when
a = 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import DenominatorDegenerate, DimensionMismatch, QuadratureFailure

QUAD_TOL = 1e-8
_QUAD_LIMIT = 500  # max subintervals; ~10.5k evaluations, under the 1e5 cap
DENOM_TOL = 1e-10


@dataclass(frozen=True)
class MPLaw:
    """Marchenko-Pastur law at a given aspect ratio."""

    aspect_ratio: float

    def __post_init__(self):
        if not self.aspect_ratio > 0:
            raise DimensionMismatch("aspect ratio must be positive")

    @property
    def support(self) -> tuple[float, float]:
        rt = math.sqrt(self.aspect_ratio)
        return (1.0 - rt) ** 2, (1.0 + rt) ** 2

    @property
    def point_mass_at_zero(self) -> float:
        return max(1.0 - 1.0 / self.aspect_ratio, 0.0)


def mp_integral(law: MPLaw, integrand, include_point_mass: bool = True,
                tol: float = QUAD_TOL) -> float:
    """Adaptive Gauss-Kronrod integral of ``integrand`` against the law.

    The integrand must be finite on the support, and at zero whenever the
    point mass is included (pass its continuous extension there).
    """
    zeta = law.aspect_ratio
    a, b = law.support
    half, mid = (b - a) / 2.0, (a + b) / 2.0
    norm = 1.0 / (2.0 * math.pi * zeta)

    def theta_integrand(theta):
        s = mid + half * math.sin(theta)
        if s <= 0.0:
            # reachable only when a == 0 (zeta == 1); limit of (half cos)^2 / s
            return integrand(0.0) * 2.0 * half * norm
        c = half * math.cos(theta)
        return integrand(s) * c * c * norm / s

    quad_out = integrate.quad(
        theta_integrand,
        -math.pi / 2.0,
        math.pi / 2.0,
        epsabs=min(tol * 1e-4, 1e-12),
        epsrel=1e-12,
        limit=_QUAD_LIMIT,
        full_output=1,  # also suppresses convergence warnings; abserr is checked
    )
    value, abserr = quad_out[0], quad_out[1]
    if abserr > tol:
        raise QuadratureFailure(
            f"estimated quadrature error {abserr:.2e} exceeds tolerance {tol:.0e}"
        )
    pm = law.point_mass_at_zero
    if include_point_mass and pm > 0.0:
        value += pm * integrand(0.0)
    return value


def mp_moment(law: MPLaw, k: int) -> float:
    """Closed-form k-th moment: sum_i C(k,i) C(k-1,i) zeta^i / (i + 1)."""
    if k < 0:
        raise DimensionMismatch("moment order must be nonnegative")
    if k == 0:
        return 1.0
    zeta = law.aspect_ratio
    return float(
        sum(
            math.comb(k, i) * math.comb(k - 1, i) * zeta**i / (i + 1)
            for i in range(k)
        )
    )


# -- building blocks of the limit formulas (all with the full law) -----------

def signal_decay(law: MPLaw, time: float) -> float:
    """integral of exp(-2 T z); the point mass contributes its full weight."""
    return mp_integral(law, lambda s: math.exp(-2.0 * time * s))


def weighted_signal_decay(law: MPLaw, time: float) -> float:
    """integral of z exp(-2 T z); vanishes at z = 0."""
    return mp_integral(law, lambda s: s * math.exp(-2.0 * time * s))


def dof_integral(law: MPLaw, time: float) -> float:
    """integral of 1 - exp(-T z); vanishes at z = 0."""
    return mp_integral(law, lambda s: -math.expm1(-time * s))


def noise_flow_integral(law: MPLaw, time: float) -> float:
    """integral of (1 - exp(-T z))^2 / z, continuous extension 0 at z = 0."""

    def phi(s):
        if s == 0.0:
            return 0.0
        return math.expm1(-time * s) ** 2 / s

    return mp_integral(law, phi)


def gcv_denominator(law: MPLaw, time: float) -> float:
    """(1 - zeta * integral(1 - exp(-T z)))^2, the squared dof correction."""
    return (1.0 - law.aspect_ratio * dof_integral(law, time)) ** 2


def risk_limit(law: MPLaw, signal_energy: float, noise_variance: float,
               time: float) -> float:
    """Limiting conditional risk of gradient flow at elapsed time T."""
    if not signal_energy + noise_variance > 0:
        raise DimensionMismatch("signal energy + noise variance must be positive")
    zeta = law.aspect_ratio
    return (
        signal_energy * signal_decay(law, time)
        + zeta * noise_variance * noise_flow_integral(law, time)
        + noise_variance
    )


def gcv_limit(law: MPLaw, signal_energy: float, noise_variance: float,
              time: float, truncate_noise: bool = False) -> float:
    """Limiting GCV value of gradient flow at elapsed time T.

    With the point mass included in every integral, the plain (1 - zeta)
    noise term passes both large-T sanity limits (residual noise fraction
    1 - zeta below the interpolation threshold, zero above); the truncated
    (1 - zeta)_+ variant that appears alongside it in some displays is
    exposed via ``truncate_noise`` for comparison.
    """
    zeta = law.aspect_ratio
    denom = gcv_denominator(law, time)
    if denom <= DENOM_TOL:
        raise DenominatorDegenerate(
            f"squared dof denominator {denom:.2e} at time {time:g}"
        )
    noise_const = max(1.0 - zeta, 0.0) if truncate_noise else 1.0 - zeta
    numerator = (
        signal_energy * weighted_signal_decay(law, time)
        + noise_variance * noise_const
        + noise_variance * zeta * signal_decay(law, time)
    )
    return numerator / denom


def mismatch(law: MPLaw, signal_energy: float, noise_variance: float,
             time: float) -> float:
    """Denominator-cleared gap between the risk and GCV limits.

    Multiplying the limit identity through by the squared dof denominator
    w(T) gives

        D(T) = r2 * (v(T) w(T) - u(T)) + s2 * (vt(T) w(T) - ut(T)),

    with v the signal decay, u its z-weighted version, vt the risk noise
    factor 1 + zeta * integral((1-exp(-Tz))^2 / z) and ut the GCV noise
    numerator (1 - zeta) + zeta v(T).  D(0) = D'(0) = 0; nonvanishing for
    T > 0 is exactly the risk/GCV inconsistency.
    """
    zeta = law.aspect_ratio
    v = signal_decay(law, time)
    u = weighted_signal_decay(law, time)
    w = gcv_denominator(law, time)
    vt = 1.0 + zeta * noise_flow_integral(law, time)
    ut = (1.0 - zeta) + zeta * v
    return signal_energy * (v * w - u) + noise_variance * (vt * w - ut)


def component_mismatch(law: MPLaw, time: float, which: str) -> tuple[float, float]:
    """Both sides of the signal or noise component-mismatch identity.

    ``signal``: lhs = signal decay, rhs = weighted decay / denominator.
    ``noise``:  lhs = risk noise factor, rhs = GCV noise numerator / denominator.
    """
    w = gcv_denominator(law, time)
    if w <= DENOM_TOL:
        raise DenominatorDegenerate(f"denominator {w:.2e} at time {time:g}")
    zeta = law.aspect_ratio
    if which == "signal":
        return signal_decay(law, time), weighted_signal_decay(law, time) / w
    if which == "noise":
        lhs = 1.0 + zeta * noise_flow_integral(law, time)
        rhs = ((1.0 - zeta) + zeta * signal_decay(law, time)) / w
        return lhs, rhs
    raise DimensionMismatch("which must be 'signal' or 'noise'")


@dataclass(frozen=True)
class DerivativeTable:
    """Second derivatives at T = 0 of the four component-mismatch sides.

    ``computed`` holds Richardson-extrapolated central differences of the
    quadrature-evaluated functions; ``claimed`` the published closed forms.
    The two signal closed forms are correct only as a set (their left/right
    assignment is swapped between statement and derivation in the source
    material), so ``signal_set_matches`` compares them unordered.  The noise
    left side's published value 4 zeta^2 disagrees with the derivative of
    the displayed integrand; ``matches`` records the per-entry outcome.
    """

    computed: dict[str, float]
    claimed: dict[str, float]
    matches: dict[str, bool]
    signal_set_matches: bool
    signal_larger_side: str


def _fd_second(f, h: float) -> float:
    def d2(step):
        return (f(step) - 2.0 * f(0.0) + f(-step)) / step**2

    coarse, fine = d2(h), d2(h / 2.0)
    return (4.0 * fine - coarse) / 3.0  # one Richardson step


def derivative_table(law: MPLaw, h: float = 1e-3) -> DerivativeTable:
    """Finite-difference check of the published curvature values at T = 0."""
    zeta = law.aspect_ratio

    def w(t):
        return gcv_denominator(law, t)

    funcs = {
        "signal_lhs": lambda t: signal_decay(law, t) * w(t),
        "signal_rhs": lambda t: weighted_signal_decay(law, t),
        "noise_lhs": lambda t: (1.0 + zeta * noise_flow_integral(law, t)) * w(t),
        "noise_rhs": lambda t: (1.0 - zeta) + zeta * signal_decay(law, t),
    }
    computed = {name: _fd_second(f, h) for name, f in funcs.items()}
    claimed = {
        "signal_lhs": 4.0 + 12.0 * zeta + 4.0 * zeta**2,
        "signal_rhs": 4.0 + 14.0 * zeta + 4.0 * zeta**2,
        "noise_lhs": 4.0 * zeta**2,
        "noise_rhs": 4.0 * zeta + 4.0 * zeta**2,
    }
    tol = 1e-2 * max(1.0, zeta**2)
    matches = {k: abs(computed[k] - claimed[k]) < tol for k in funcs}
    claimed_set = sorted(claimed[k] for k in ("signal_lhs", "signal_rhs"))
    computed_set = sorted(computed[k] for k in ("signal_lhs", "signal_rhs"))
    signal_set_matches = all(
        abs(c - d) < tol for c, d in zip(claimed_set, computed_set)
    )
    larger = (
        "lhs" if computed["signal_lhs"] >= computed["signal_rhs"] else "rhs"
    )
    return DerivativeTable(computed, claimed, matches, signal_set_matches, larger)


@dataclass(frozen=True)
class LimitCurves:
    """Limit values on a time grid, ready for CSV export."""

    time_grid: np.ndarray
    risk: np.ndarray
    gcv: np.ndarray
    mismatch: np.ndarray
    aspect_ratio: float
    signal_energy: float
    noise_variance: float

    def to_rows(self) -> list[dict]:
        rows = []
        for label, values in (
            ("risk_limit", self.risk),
            ("gcv_limit", self.gcv),
            ("mismatch", self.mismatch),
        ):
            for t, v in zip(self.time_grid, values):
                rows.append(
                    {"T": t, "zeta": self.aspect_ratio, "value": v, "label": label}
                )
        return rows


def limit_curves(law: MPLaw, signal_energy: float, noise_variance: float,
                 time_grid) -> LimitCurves:
    """Evaluate the risk limit, GCV limit, and mismatch on a time grid."""
    grid = np.asarray(time_grid, dtype=float)
    risk = np.array([risk_limit(law, signal_energy, noise_variance, t) for t in grid])
    gcv = np.array([gcv_limit(law, signal_energy, noise_variance, t) for t in grid])
    gap = np.array([mismatch(law, signal_energy, noise_variance, t) for t in grid])
    return LimitCurves(
        grid, risk, gcv, gap, law.aspect_ratio, signal_energy, noise_variance
    )
