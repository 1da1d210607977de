import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gdcv
from gdcv.data import GDTrajectory
from gdcv.exceptions import EmptyInput, ModelMismatch
from gdcv.risk import GCVDegeneracyWarning


def _dataset(rng, n, p, noise=1.0):
    X = rng.standard_normal((n, p))
    beta = rng.standard_normal(p) / np.sqrt(p)
    y = X @ beta + noise * rng.standard_normal(n)
    return gdcv.build_dataset(X, y)


class TestGCV:
    def test_null_model_is_mean_square_response(self, small_data):
        sched = gdcv.StepSchedule.constant(0.01, 5)
        traj = gdcv.run_gd(small_data, sched)
        curve = gdcv.gcv_risk(small_data, traj)
        assert curve.values[0] == pytest.approx(np.mean(small_data.response**2))

    def test_exact_interpolation_flagged_infinite(self):
        data = gdcv.build_dataset(np.array([[1.0]]), np.array([1.0]))
        traj = gdcv.run_gd(data, gdcv.StepSchedule.constant(1.0, 1), max_eigval=1.0)
        with pytest.warns(GCVDegeneracyWarning):
            curve = gdcv.gcv_risk(data, traj)
        assert curve.values[1] == np.inf
        assert curve.degenerate[1] and not curve.degenerate[0]

    def test_dominates_training_error(self, rng):
        data = _dataset(rng, 40, 20)
        sched = gdcv.StepSchedule.constant(0.02, 50)
        traj = gdcv.run_gd(data, sched)
        curve = gdcv.gcv_risk(data, traj)
        train = np.mean(
            (data.response[:, None] - data.features @ traj.iterates.T) ** 2, axis=0
        )
        cache = gdcv.spectral_decompose(data)
        traces = gdcv.smoother_trace_path(cache, sched)
        inside = (traces > 0) & (traces < 1)
        assert np.all(curve.values[inside] >= train[inside])
        assert np.allclose(curve.values * (1 - traces) ** 2, train)

    def test_overparameterized_gcv_blows_up_along_path(self):
        # high-SNR overparameterized run: GCV rises far above the true risk
        model = gdcv.SimModel(
            n=750, p=1500, signal=gdcv.RandomSphere(norm=5.0),
            noise=gdcv.Gaussian(1.0), seed=5,
        )
        data, _, truth = gdcv.generate(model)
        sched = gdcv.StepSchedule.constant(0.01, 400)
        cache = gdcv.spectral_decompose(data)
        traj = gdcv.run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
        gcv = gdcv.gcv_risk(data, traj, cache).values
        risk = gdcv.true_risk_closed_form(traj, truth).values
        assert gcv[-1] - risk[-1] > 3.0
        assert abs(gcv[0] - risk[0]) < 1.5


class TestLoocvNaive:
    def test_two_identical_points(self):
        c = 3.0
        data = gdcv.build_dataset(np.array([[1.0], [1.0]]), np.array([c, c]))
        sched = gdcv.StepSchedule.constant(0.2, 4)
        curve = gdcv.loocv_naive(data, sched)
        assert curve.values[0] == pytest.approx(c**2)
        # drop-row fit from the other identical point, full-sample 1/n
        b, expected = 0.0, [c**2]
        for _ in range(4):
            b = b + (0.2 / 2.0) * (c - b)
            expected.append((c - b) ** 2)
        assert np.allclose(curve.values, expected)

    def test_zero_schedule_constant_curve(self, small_data):
        curve = gdcv.loocv_naive(small_data, gdcv.StepSchedule(np.zeros(3)))
        assert np.allclose(curve.values, np.mean(small_data.response**2))


class TestFunctionalLoocv:
    def test_squared_reproduces_loocv_exactly(self, rng):
        data = _dataset(rng, 20, 15)
        sched = gdcv.StepSchedule.constant(0.05, 30)
        a = gdcv.loocv_naive(data, sched)
        b = gdcv.functional_loocv(data, sched, psi=gdcv.squared_error())
        assert np.array_equal(a.values, b.values)

    def test_constant_functional(self, rng):
        data = _dataset(rng, 10, 5)
        one = gdcv.ErrorFunctional(lambda y, u: np.ones_like(u), "one")
        curve = gdcv.functional_loocv(
            data, gdcv.StepSchedule.constant(0.1, 3), psi=one
        )
        assert np.array_equal(curve.values, np.ones(4))

    def test_absolute_error_tracks_monte_carlo_risk(self):
        # nonlinear heavy-tailed model: the plug-in absolute-error estimate
        # stays within 5% of the Monte Carlo conditional absolute risk
        model = gdcv.SimModel(
            n=500, p=1000, covariance=gdcv.AR(0.25),
            signal=gdcv.TopEigenvector(50.0),
            response=gdcv.LinearPlusQuadratic(),
            noise=gdcv.StudentT(5.0), seed=11,
        )
        data, _, truth = gdcv.generate(model)
        sched = gdcv.StepSchedule.constant(0.01, 300)
        cache = gdcv.spectral_decompose(data)
        traj = gdcv.run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
        _, loo_preds = gdcv.loocv_fast(data, sched, cache=cache)
        plug_in = gdcv.functional_loocv(
            data, sched, psi=gdcv.absolute_error(), loo_predictions=loo_preds
        )
        mc = gdcv.true_risk_monte_carlo(
            traj, model, n_test=20000, seed=77, psi=gdcv.absolute_error(),
            truth=truth,
        )
        rel = np.abs(plug_in.values - mc.values) / mc.values
        assert rel.max() < 0.05

    def test_indicator_functional_is_cdf_estimate(self, rng):
        data = _dataset(rng, 15, 10)
        sched = gdcv.StepSchedule.constant(0.05, 5)
        curve = gdcv.functional_loocv(data, sched, psi=gdcv.indicator_below(0.0))
        assert np.all((curve.values >= 0) & (curve.values <= 1))


class TestTrueRisk:
    def test_estimator_equal_to_signal_gives_noise_floor(self):
        truth = gdcv.GroundTruth(
            beta0=np.array([1.0, -2.0]), noise_variance=0.7, sigma_chol=None,
            response_mean=lambda X: X @ np.array([1.0, -2.0]), is_linear=True,
        )
        iterates = np.tile(truth.beta0, (3, 1))
        traj = GDTrajectory(iterates, gdcv.StepSchedule.constant(0.1, 2))
        curve = gdcv.true_risk_closed_form(traj, truth)
        assert np.allclose(curve.values, 0.7)

    def test_null_iterate_has_null_risk(self):
        beta0 = np.array([3.0, 4.0])
        truth = gdcv.GroundTruth(
            beta0=beta0, noise_variance=1.0, sigma_chol=None,
            response_mean=lambda X: X @ beta0, is_linear=True,
        )
        traj = GDTrajectory(np.zeros((2, 2)), gdcv.StepSchedule.constant(0.1, 1))
        curve = gdcv.true_risk_closed_form(traj, truth)
        assert curve.values[0] == pytest.approx(25.0 + 1.0)

    def test_nonlinear_model_rejected(self):
        model = gdcv.SimModel(
            n=20, p=10, covariance=gdcv.AR(0.3),
            signal=gdcv.TopEigenvector(2.0),
            response=gdcv.LinearPlusQuadratic(), seed=1,
        )
        _, _, truth = gdcv.generate(model)
        traj = GDTrajectory(np.zeros((2, 10)), gdcv.StepSchedule.constant(0.1, 1))
        with pytest.raises(ModelMismatch):
            gdcv.true_risk_closed_form(traj, truth)

    def test_underparameterized_risk_decreases_to_plateau(self):
        model = gdcv.SimModel(
            n=1000, p=500, signal=gdcv.RandomSphere(norm=5.0),
            noise=gdcv.Gaussian(1.0), seed=0,
        )
        data, _, truth = gdcv.generate(model)
        sched = gdcv.StepSchedule.constant(0.01, 300)
        traj = gdcv.run_gd(data, sched)
        risk = gdcv.true_risk_closed_form(traj, truth).values
        assert risk[0] == pytest.approx(26.0, abs=0.5)
        assert risk.min() < 5.0
        assert np.all(np.diff(risk) < 0)  # still descending toward the plateau
        assert risk[-1] - risk.min() < 1e-12

    @pytest.mark.parametrize("p", [500, 2000])
    def test_loocv_tracks_risk_while_gcv_departs(self, p):
        # the headline contrast: along a long overparameterized path GCV's
        # error dwarfs the null-risk scale while LOOCV stays within a tenth
        # of it; underparameterized GCV stays merely mediocre
        for seed in range(3):
            model = gdcv.SimModel(
                n=1000, p=p, signal=gdcv.RandomSphere(norm=5.0),
                noise=gdcv.Gaussian(1.0), seed=seed,
            )
            data, _, truth = gdcv.generate(model)
            sched = gdcv.StepSchedule.constant(0.01, 900)
            cache = gdcv.spectral_decompose(data)
            traj = gdcv.run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
            risk = gdcv.true_risk_closed_form(traj, truth).values
            loocv, _ = gdcv.loocv_fast(data, sched, cache=cache)
            assert np.abs(loocv.values - risk).max() <= 0.1 * 26.0
            if p == 2000:
                gcv = gdcv.gcv_risk(data, traj, cache).values
                assert np.abs(gcv - risk).max() > 1.0 * 26.0

    def test_monte_carlo_matches_closed_form_within_3se(self, rng):
        model = gdcv.SimModel(
            n=80, p=40, signal=gdcv.RandomSphere(norm=2.0),
            noise=gdcv.Gaussian(0.5), seed=9,
        )
        data, _, truth = gdcv.generate(model)
        sched = gdcv.StepSchedule.constant(0.02, 40)
        traj = gdcv.run_gd(data, sched)
        closed = gdcv.true_risk_closed_form(traj, truth)
        mc = gdcv.true_risk_monte_carlo(traj, model, n_test=40_000, seed=5, truth=truth)
        assert np.all(np.abs(mc.values - closed.values) <= 3.0 * mc.stderr)

    def test_noise_free_perfect_fit_has_zero_risk(self):
        model = gdcv.SimModel(
            n=10, p=4, signal=gdcv.RandomSphere(norm=1.0),
            noise=gdcv.Gaussian(0.0), seed=2,
        )
        _, _, truth = gdcv.generate(model)
        traj = GDTrajectory(
            np.tile(truth.beta0, (2, 1)), gdcv.StepSchedule.constant(0.1, 1)
        )
        mc = gdcv.true_risk_monte_carlo(traj, model, n_test=500, seed=3, truth=truth)
        assert np.allclose(mc.values, 0.0)


class TestTuneByLoocv:
    def test_monotone_decreasing_selects_last(self):
        curve = gdcv.RiskCurve(np.arange(5), np.array([5.0, 4, 3, 2, 1]), "LOOCV")
        assert gdcv.tune_by_loocv(curve) == 4

    def test_tie_breaks_to_smallest(self):
        curve = gdcv.RiskCurve(np.arange(4), np.ones(4), "LOOCV")
        assert gdcv.tune_by_loocv(curve) == 0

    def test_empty_input(self):
        with pytest.raises((EmptyInput, gdcv.exceptions.DimensionMismatch)):
            gdcv.RiskCurve(np.array([], dtype=int), np.array([]), "LOOCV")

    def test_near_oracle_regret_on_linear_sim(self):
        for seed in range(3):
            model = gdcv.SimModel(
                n=500, p=1000, signal=gdcv.RandomSphere(norm=1.0),
                noise=gdcv.Gaussian(1.0), seed=seed,
            )
            data, _, truth = gdcv.generate(model)
            sched = gdcv.StepSchedule.constant(0.01, 200)
            cache = gdcv.spectral_decompose(data)
            traj = gdcv.run_gd(data, sched, max_eigval=float(cache.gram_eigenvalues[0]))
            risk = gdcv.true_risk_closed_form(traj, truth).values
            curve, _ = gdcv.loocv_fast(data, sched, cache=cache)
            k_star = gdcv.tune_by_loocv(curve)
            assert 0 < k_star < sched.n_steps  # interior optimum at this design
            assert risk[k_star] - risk.min() < 0.05 * 1.0

    @settings(max_examples=30, deadline=None)
    @given(
        values=st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=40),
        shift=st.integers(-10**6, 10**6),
    )
    def test_shift_invariance(self, values, shift):
        # integer-valued floats keep the shift exact, so the argmin ordering
        # is genuinely preserved rather than collapsed by rounding
        vals = np.asarray(values, dtype=float)
        base = gdcv.RiskCurve(np.arange(vals.size), vals, "LOOCV")
        moved = gdcv.RiskCurve(np.arange(vals.size), vals + float(shift), "LOOCV")
        assert gdcv.tune_by_loocv(base) == gdcv.tune_by_loocv(moved)


class TestRiskCurveSerialization:
    def test_rows_roundtrip(self, tmp_path):
        from gdcv import io

        curve = gdcv.RiskCurve(
            np.arange(3), np.array([1.5, 2.5, 3.5]), "GCV",
            stderr=np.array([0.1, 0.2, 0.3]),
        )
        path = io.write_risk_curves(tmp_path / "c.csv", [curve])
        text = path.read_text(encoding="utf-8")
        assert text.splitlines()[0] == "k,value,label,stderr"
        assert text.splitlines()[1] == "0,1.5,GCV,0.1"
