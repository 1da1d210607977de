"""Acceptance criteria as runnable checks.

Each criterion returns a CriterionResult with the measured values and the
tolerance it was judged against; the pytest acceptance module and the CLI
``accept`` command both run these.  Heavy simulation batches are cached so
criteria sharing a batch (5/6, 7/9) pay for it once per process.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .asymptotics import MPLaw, gcv_limit, mismatch, mp_integral, mp_moment, risk_limit
from .data import StepSchedule, build_dataset, spectral_decompose
from .gd import GDFilter, GFFilter, gradient_flow, run_gd, smoother_trace
from .intervals import (
    IntervalSpec,
    error_distribution_distance,
    loo_error_quantiles,
)
from .loo import loo_predictions_fast, loo_via_augmented, loocv_fast
from .risk import gcv_risk, loo_predictions_naive, true_risk_closed_form
from .sim import (
    AR,
    Gaussian,
    LinearPlusQuadratic,
    RandomSphere,
    SimModel,
    StudentT,
    TopEigenvector,
    generate,
    sample_pairs,
)

N_SEEDS = 20
SEEDS = tuple(range(N_SEEDS))


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    tolerance: str
    measured: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = {k: v for k, v in self.measured.items() if not isinstance(v, (list, dict))}
        parts = ", ".join(f"{k}={_short(v)}" for k, v in shown.items())
        return (
            f"[{status}] criterion {self.cid} ({self.name}): {parts} "
            f"| tolerance: {self.tolerance} | {self.runtime_s:.1f}s"
        )

    def to_dict(self) -> dict:
        return {
            "criterion": self.cid,
            "name": self.name,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "measured": _jsonable(self.measured),
            "runtime_s": self.runtime_s,
        }


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _timed(func):
    t0 = time.perf_counter()
    out = func()
    return out, time.perf_counter() - t0


# --------------------------------------------------------------------------
# criterion 1: three-way LOO oracle equality on random instances
# --------------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    def body():
        rng = np.random.default_rng(12345)
        worst_fast, worst_aug = 0.0, 0.0
        for trial in range(20):
            n = int(rng.integers(20, 61))
            p = int(rng.integers(10, 101))
            K = int(rng.integers(10, 151))
            delta = (0.005, 0.05)[trial % 2]
            X = rng.standard_normal((n, p))
            beta = rng.standard_normal(p) / np.sqrt(p)
            y = X @ beta + rng.standard_normal(n)
            data = build_dataset(X, y)
            sched = StepSchedule.constant(delta, K)
            naive = loo_predictions_naive(data, sched)
            fast = loo_predictions_fast(data, sched)
            worst_fast = max(worst_fast, float(np.abs(naive - fast).max()))
            aug = np.array(
                [loo_via_augmented(data, sched, i) for i in range(n)]
            )
            worst_aug = max(worst_aug, float(np.abs(naive - aug).max()))
        return worst_fast, worst_aug

    (worst_fast, worst_aug), dt = _timed(body)
    return CriterionResult(
        1,
        "LOO oracle equality",
        worst_fast < 1e-8 and worst_aug < 1e-10 and dt < 120,
        "|naive-shortcut| < 1e-8, |naive-augmented| < 1e-10, runtime < 120 s",
        {"max_naive_vs_shortcut": worst_fast, "max_naive_vs_augmented": worst_aug},
        dt,
    )


# --------------------------------------------------------------------------
# criterion 2: Marchenko-Pastur moments by quadrature
# --------------------------------------------------------------------------

def criterion_2() -> CriterionResult:
    def body():
        worst = 0.0
        for zeta in (0.1, 0.5, 1.5, 3.0):
            law = MPLaw(zeta)
            for k in range(5):
                quad = mp_integral(law, lambda s, k=k: s**k if k else 1.0)
                worst = max(worst, abs(quad - mp_moment(law, k)))
        return worst

    worst, dt = _timed(body)
    return CriterionResult(
        2,
        "MP moments",
        worst < 1e-6 and dt < 5,
        "|quadrature - closed form| < 1e-6 for M0..M4, runtime < 5 s",
        {"max_abs_error": worst},
        dt,
    )


# --------------------------------------------------------------------------
# criterion 3: limit endpoints at T = 0
# --------------------------------------------------------------------------

def criterion_3() -> CriterionResult:
    def body():
        worst = 0.0
        for r2 in (0.5, 5.0, 25.0):
            for s2 in (0.25, 1.0, 4.0):
                for zeta in (0.1, 0.5, 1.5, 3.0):
                    law = MPLaw(zeta)
                    null = r2 + s2
                    worst = max(
                        worst,
                        abs(risk_limit(law, r2, s2, 0.0) - null),
                        abs(gcv_limit(law, r2, s2, 0.0) - null),
                    )
        return worst

    worst, dt = _timed(body)
    return CriterionResult(
        3,
        "limit endpoints",
        worst < 1e-8 and dt < 10,
        "risk_limit(0) = gcv_limit(0) = r2 + s2 within 1e-8, runtime < 10 s",
        {"max_abs_error": worst},
        dt,
    )


# --------------------------------------------------------------------------
# criterion 4: mismatch second derivative at T = 0
# --------------------------------------------------------------------------

def criterion_4() -> CriterionResult:
    """Checks the published value -2 zeta (2 r2 + s2) for D''(0).

    Independent evaluation (exact Taylor coefficients from the closed-form
    MP moments, confirmed by high-precision quadrature) gives
    D''(0) = 2 zeta r2, so this criterion measures the published value's
    error; both numbers are reported.
    """

    def body():
        rows = []
        worst_rel = 0.0
        h = 1e-3
        for zeta in (0.5, 1.0, 2.0):
            law = MPLaw(zeta)
            for r2, s2 in ((1.0, 1.0), (25.0, 1.0)):
                def d2(step):
                    return (
                        mismatch(law, r2, s2, step)
                        - 2.0 * mismatch(law, r2, s2, 0.0)
                        + mismatch(law, r2, s2, -step)
                    ) / step**2

                fd = (4.0 * d2(h / 2.0) - d2(h)) / 3.0
                stated = -2.0 * zeta * (2.0 * r2 + s2)
                derived = 2.0 * zeta * r2
                rel = abs(fd - stated) / abs(stated)
                worst_rel = max(worst_rel, rel)
                rows.append(
                    {
                        "zeta": zeta,
                        "r2": r2,
                        "s2": s2,
                        "fd": fd,
                        "stated": stated,
                        "independent": derived,
                        "rel_error_vs_stated": rel,
                    }
                )
        return worst_rel, rows

    (worst_rel, rows), dt = _timed(body)
    return CriterionResult(
        4,
        "mismatch curvature at 0",
        worst_rel < 1e-3 and dt < 30,
        "FD D''(0) within 1e-3 relative of -2*zeta*(2*r2+s2), runtime < 30 s",
        {"max_rel_error_vs_stated": worst_rel, "cases": rows},
        dt,
    )


# --------------------------------------------------------------------------
# criteria 5 and 6: GCV inconsistency vs LOOCV consistency at desk scale
# --------------------------------------------------------------------------

TRACKING_SIM = dict(n=1000, p=2000, r2=25.0, s2=1.0, delta=0.01, n_steps=200)


@lru_cache(maxsize=1)
def tracking_simulations():
    """Per-seed risk/GCV/LOOCV curves for the desk-scale consistency checks."""
    cfg = TRACKING_SIM
    sched = StepSchedule.constant(cfg["delta"], cfg["n_steps"])
    out = []
    for seed in SEEDS:
        model = SimModel(
            n=cfg["n"],
            p=cfg["p"],
            signal=RandomSphere(norm=float(np.sqrt(cfg["r2"]))),
            noise=Gaussian(variance=cfg["s2"]),
            seed=seed,
        )
        data, _, truth = generate(model)
        cache = spectral_decompose(data)
        trajectory = run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
        risk = true_risk_closed_form(trajectory, truth).values
        gcv = gcv_risk(data, trajectory, cache).values
        loocv = loocv_fast(data, sched, cache=cache)[0].values
        out.append({"risk": risk, "gcv": gcv, "loocv": loocv})
    return out


def criterion_5() -> CriterionResult:
    """GCV inconsistency at T = 1 plus limit tracking.

    The gap ratio clause is reported against its stated 10x threshold; note
    that at these parameters the two limit curves cross near T = 1 (limit
    gap 0.0206) while the LOOCV estimator's sampling fluctuation at n = 1000
    is an order of magnitude larger, so the ratio clause cannot be met at
    this desk scale (it is a property of the operating point, not of the
    estimators' implementation).
    """

    def body():
        cfg = TRACKING_SIM
        k_at_T1 = int(round(1.0 / cfg["delta"]))
        sims = tracking_simulations()
        gcv_gaps = np.array([abs(s["gcv"][k_at_T1] - s["risk"][k_at_T1]) for s in sims])
        loo_gaps = np.array(
            [abs(s["loocv"][k_at_T1] - s["risk"][k_at_T1]) for s in sims]
        )
        law = MPLaw(cfg["p"] / cfg["n"])
        rlim = risk_limit(law, cfg["r2"], cfg["s2"], 1.0)
        glim = gcv_limit(law, cfg["r2"], cfg["s2"], 1.0)
        mean_risk = float(np.mean([s["risk"][k_at_T1] for s in sims]))
        mean_gcv = float(np.mean([s["gcv"][k_at_T1] for s in sims]))
        return {
            "mean_abs_gcv_gap": float(gcv_gaps.mean()),
            "mean_abs_loocv_gap": float(loo_gaps.mean()),
            "gap_ratio": float(gcv_gaps.mean() / loo_gaps.mean()),
            "risk_rel_error_vs_limit": abs(mean_risk / rlim - 1.0),
            "gcv_rel_error_vs_limit": abs(mean_gcv / glim - 1.0),
            "limit_gap_at_T1": abs(glim - rlim),
        }

    measured, dt = _timed(body)
    passed = (
        measured["gap_ratio"] > 10.0
        and measured["risk_rel_error_vs_limit"] < 0.05
        and measured["gcv_rel_error_vs_limit"] < 0.05
        and dt < 1200
    )
    return CriterionResult(
        5,
        "GCV inconsistency at desk scale",
        passed,
        "gap ratio > 10 at T=1; risk and GCV within 5% of limits; runtime < 20 min",
        measured,
        dt,
    )


def criterion_6() -> CriterionResult:
    """LOOCV uniform closeness to the risk path in 19 of 20 seeds.

    The 0.05 (r2 + s2) threshold is about two standard deviations of the
    LOOCV estimator's sampling fluctuation at n = 1000, so a significant
    fraction of seeds land outside it at this scale; the per-seed maxima
    are reported.
    """

    def body():
        cfg = TRACKING_SIM
        sims = tracking_simulations()
        maxima = np.array([np.abs(s["loocv"] - s["risk"]).max() for s in sims])
        threshold = 0.05 * (cfg["r2"] + cfg["s2"])
        return {
            "threshold": threshold,
            "n_within": int((maxima < threshold).sum()),
            "per_seed_max": maxima.round(4).tolist(),
            "median_max": float(np.median(maxima)),
        }

    measured, dt = _timed(body)
    return CriterionResult(
        6,
        "LOOCV uniform consistency at desk scale",
        measured["n_within"] >= 19,
        "max_k |LOOCV - risk| < 0.05 (r2 + s2) in >= 19 of 20 seeds",
        measured,
        dt,
    )


# --------------------------------------------------------------------------
# criteria 7 and 9: conditional coverage and error-distribution agreement
# --------------------------------------------------------------------------

COVERAGE_SIM = dict(
    n=500, p=1000, rho=0.25, energy=50.0, dof=5.0, delta=0.01,
    n_steps=400, record_every=50, n_test=5000,
)


@lru_cache(maxsize=1)
def coverage_simulations():
    """Per-seed LOO errors and fresh test errors on the nonlinear AR model."""
    cfg = COVERAGE_SIM
    sched = StepSchedule.constant(cfg["delta"], cfg["n_steps"])
    ks = np.arange(0, cfg["n_steps"] + 1, cfg["record_every"])
    out = []
    for seed in SEEDS:
        model = SimModel(
            n=cfg["n"],
            p=cfg["p"],
            covariance=AR(rho=cfg["rho"]),
            signal=TopEigenvector(energy=cfg["energy"]),
            response=LinearPlusQuadratic(),
            noise=StudentT(dof=cfg["dof"]),
            seed=seed,
        )
        data, _, truth = generate(model)
        cache = spectral_decompose(data)
        trajectory = run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
        loo_preds = loo_predictions_fast(data, sched, cache=cache, trajectory=trajectory)
        loo_errors = data.response[:, None] - loo_preds
        X0, y0 = sample_pairs(model, truth, cfg["n_test"], seed=seed + 10_000)
        test_errors = y0[:, None] - X0 @ trajectory.iterates[ks].T
        out.append({"ks": ks, "loo_errors": loo_errors, "test_errors": test_errors})
    return out


def criterion_7() -> CriterionResult:
    def body():
        sims = coverage_simulations()
        levels = (0.8, 0.9, 0.95)
        per_seed_worst = []
        n_pass = 0
        for sim in sims:
            worst = 0.0
            for level in levels:
                spec = IntervalSpec.central(level)
                ks, bounds = loo_error_quantiles(sim["loo_errors"], spec, sim["ks"])
                errs = sim["test_errors"]
                inside = (errs >= bounds[None, :, 0]) & (errs <= bounds[None, :, 1])
                coverage = inside.mean(axis=0)
                worst = max(worst, float(np.abs(coverage - level).max()))
            per_seed_worst.append(worst)
            n_pass += worst <= 0.05
        return {
            "n_within": n_pass,
            "per_seed_worst_deviation": np.round(per_seed_worst, 4).tolist(),
        }

    measured, dt = _timed(body)
    return CriterionResult(
        7,
        "conditional coverage",
        measured["n_within"] >= 18 and dt < 1800,
        "coverage within +/-0.05 of {0.8, 0.9, 0.95} at every recorded k "
        "in >= 18 of 20 seeds, runtime < 30 min",
        measured,
        dt,
    )


def criterion_9() -> CriterionResult:
    def body():
        sim = coverage_simulations()[0]
        K = COVERAGE_SIM["n_steps"]
        ks = sim["ks"]
        stats = {}
        for k in (0, K // 4, K // 2, K):
            j = int(np.where(ks == k)[0][0])
            stats[k] = error_distribution_distance(
                sim["loo_errors"][:, k], sim["test_errors"][:, j]
            )
        return {"ks_statistics": {str(k): v for k, v in stats.items()},
                "max_ks": max(stats.values())}

    measured, dt = _timed(body)
    return CriterionResult(
        9,
        "error-distribution agreement",
        measured["max_ks"] < 0.1,
        "KS statistic < 0.1 at k in {0, K/4, K/2, K} vs 5000 test errors",
        measured,
        dt,
    )


# --------------------------------------------------------------------------
# criterion 8: GD at k = 1e4 matches gradient flow at T = 1
# --------------------------------------------------------------------------

def criterion_8() -> CriterionResult:
    def body():
        n = p = 200
        T, k = 1.0, 10_000
        model = SimModel(n=n, p=p, signal=RandomSphere(norm=1.0),
                         noise=Gaussian(variance=1.0), seed=0)
        data, _, truth = generate(model)
        cache = spectral_decompose(data)
        sched = StepSchedule.constant(T / k, k)
        trajectory = run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))

        risk_gd = true_risk_closed_form(trajectory, truth).values[-1]
        beta_gf = gradient_flow(cache, data, T)
        diff = beta_gf - truth.beta0
        risk_gf = float(diff @ diff) + truth.noise_variance

        resid_gd = data.response - data.features @ trajectory.iterates[-1]
        tr_gd = smoother_trace(cache, GDFilter(sched.deltas))
        gcv_gd = float(np.mean(resid_gd**2)) / (1.0 - tr_gd) ** 2
        resid_gf = data.response - data.features @ beta_gf
        tr_gf = smoother_trace(cache, GFFilter(T))
        gcv_gf = float(np.mean(resid_gf**2)) / (1.0 - tr_gf) ** 2
        return {
            "risk_abs_diff": abs(risk_gd - risk_gf),
            "gcv_abs_diff": abs(gcv_gd - gcv_gf),
        }

    measured, dt = _timed(body)
    return CriterionResult(
        8,
        "GD-to-flow equivalence",
        measured["risk_abs_diff"] < 1e-3 and measured["gcv_abs_diff"] < 1e-3,
        "|GD - flow| < 1e-3 for risk and GCV at n=p=200, T=1, k=1e4",
        measured,
        dt,
    )


# --------------------------------------------------------------------------
# criterion 10: benchmark scaling of naive vs shortcut LOOCV
# --------------------------------------------------------------------------

def criterion_10() -> CriterionResult:
    def body():
        n = p = 300
        model = SimModel(n=n, p=p, signal=RandomSphere(norm=1.0), seed=3)
        data, _, _ = generate(model)
        ks = (100, 200, 400)

        def naive_time(k):
            sched = StepSchedule.constant(0.01, k)
            t0 = time.perf_counter()
            loo_predictions_naive(data, sched)
            return time.perf_counter() - t0

        # Timing protocol for a shared machine: several sweeps, each timing
        # all three path lengths back to back in random order (adjacent
        # samples see the same machine conditions, and the shuffle breaks
        # aliasing against periodic background load).  Slopes are judged by
        # the median of per-sweep ratios.
        order_rng = np.random.default_rng(0)
        naive_time(50)  # warm-up (BLAS pools, caches)
        sweeps = []
        for _ in range(5):
            perm = order_rng.permutation(len(ks))
            sweep = {}
            for j in perm:
                sweep[ks[j]] = naive_time(ks[j])
            sweeps.append(sweep)
        ratio_12 = float(np.median([s[200] / s[100] for s in sweeps]))
        ratio_24 = float(np.median([s[400] / s[200] for s in sweeps]))
        naive_times = {k: min(s[k] for s in sweeps) for k in ks}

        sched = StepSchedule.constant(0.01, 400)
        shortcut_time = np.inf
        for _ in range(2):
            t0 = time.perf_counter()
            loocv_fast(data, sched)
            shortcut_time = min(shortcut_time, time.perf_counter() - t0)
        return {
            "naive_seconds": {str(k): round(v, 3) for k, v in naive_times.items()},
            "doubling_ratio_100_200": ratio_12,
            "doubling_ratio_200_400": ratio_24,
            "shortcut_seconds_k400": round(shortcut_time, 3),
            "speedup_k400": naive_times[400] / shortcut_time,
        }

    measured, dt = _timed(body)
    linear = (
        1.6 <= measured["doubling_ratio_100_200"] <= 2.4
        and 1.6 <= measured["doubling_ratio_200_400"] <= 2.4
    )
    return CriterionResult(
        10,
        "benchmark scaling",
        linear and measured["speedup_k400"] >= 5.0,
        "naive time doubles with k within 20%; shortcut >= 5x faster at k=400",
        measured,
        dt,
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}

SUITES = {
    "oracle-equality": (1,),
    "mp-moments": (2,),
    "limits": (3, 4, 5, 6),
    "coverage": (7, 9),
    "gf-equivalence": (8,),
    "benchmark": (10,),
}


def run_criteria(ids, verbose: bool = True) -> list[CriterionResult]:
    results = []
    for cid in ids:
        result = CRITERIA[cid]()
        if verbose:
            print(result.line())
        results.append(result)
    return results
