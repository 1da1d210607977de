import numpy as np
import pytest

import gdcv
from gdcv.exceptions import InvalidConfig


class TestCovariance:
    def test_ar_quarter_p3_exact(self):
        model = gdcv.SimModel(
            n=4, p=3, covariance=gdcv.AR(0.25),
            signal=gdcv.TopEigenvector(1.0), seed=0,
        )
        _, _, truth = gdcv.generate(model)
        Sigma = truth.sigma_chol @ truth.sigma_chol.T
        expected = np.array(
            [[1.0, 0.25, 0.0625], [0.25, 1.0, 0.25], [0.0625, 0.25, 1.0]]
        )
        assert np.allclose(Sigma, expected, atol=1e-12)

    def test_isotropic_has_no_factor(self):
        _, _, truth = gdcv.generate(gdcv.SimModel(n=3, p=2, seed=0))
        assert truth.sigma_chol is None

    def test_sample_covariance_matches(self):
        model = gdcv.SimModel(
            n=100_000, p=10, covariance=gdcv.AR(0.25),
            signal=gdcv.RandomSphere(1.0), seed=3,
        )
        data, _, _ = gdcv.generate(model)
        sample = data.features.T @ data.features / data.n
        idx = np.arange(10)
        assert np.abs(sample - 0.25 ** np.abs(idx[:, None] - idx)).max() < 0.02


class TestSignal:
    def test_sphere_norm_exact(self):
        _, _, truth = gdcv.generate(
            gdcv.SimModel(n=2, p=50, signal=gdcv.RandomSphere(norm=5.0), seed=1)
        )
        assert np.linalg.norm(truth.beta0) == pytest.approx(5.0)

    def test_top_eigenvector_energy(self):
        model = gdcv.SimModel(
            n=2, p=40, covariance=gdcv.AR(0.25),
            signal=gdcv.TopEigenvector(energy=50.0), seed=1,
        )
        _, _, truth = gdcv.generate(model)
        Sigma = truth.sigma_chol @ truth.sigma_chol.T
        assert truth.beta0 @ Sigma @ truth.beta0 == pytest.approx(50.0, abs=1e-8)

    def test_top_eigenvector_needs_structure(self):
        with pytest.raises(InvalidConfig):
            gdcv.generate(
                gdcv.SimModel(n=2, p=4, signal=gdcv.TopEigenvector(1.0), seed=0)
            )


class TestResponse:
    def test_zero_signal_zero_noise_is_null(self):
        model = gdcv.SimModel(
            n=20, p=5, signal=gdcv.RandomSphere(norm=0.0),
            noise=gdcv.Gaussian(0.0), seed=4,
        )
        data, _, _ = gdcv.generate(model)
        assert np.allclose(data.response, 0.0)

    def test_quadratic_component_identity_default(self):
        model = gdcv.SimModel(
            n=50, p=6, signal=gdcv.RandomSphere(norm=0.0),
            response=gdcv.LinearPlusQuadratic(), noise=gdcv.Gaussian(0.0), seed=4,
        )
        data, _, truth = gdcv.generate(model)
        expected = (np.einsum("ij,ij->i", data.features, data.features) - 6) / 6
        assert np.allclose(data.response, expected)

    def test_quadratic_component_function(self):
        # x = e1, A = I, Sigma = I, p = 2 gives (1 - 2) / 2
        val = gdcv.quadratic_response_component(
            np.array([1.0, 0.0]), np.eye(2), np.eye(2), 2
        )
        assert val == pytest.approx(-0.5)
        assert gdcv.quadratic_response_component(
            np.array([1.0, 0.0]), np.zeros((2, 2)), np.eye(2), 2
        ) == pytest.approx(0.0)

    def test_quadratic_component_centered(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((100_000, 8))
        vals = gdcv.quadratic_response_component(X, np.eye(8), np.eye(8), 8)
        se = vals.std() / np.sqrt(vals.size)
        assert abs(vals.mean()) < 3 * se


class TestNoise:
    def test_standardized_t_unit_variance(self):
        model = gdcv.SimModel(
            n=100_000, p=2, signal=gdcv.RandomSphere(0.0),
            noise=gdcv.StudentT(dof=5.0), seed=6,
        )
        data, _, _ = gdcv.generate(model)
        var = data.response.var()
        se = np.sqrt(2.0 / data.n) * 3  # crude 3-sigma band for heavy tails
        assert abs(var - 1.0) < max(3 * se, 0.05)

    def test_dof_guard(self):
        with pytest.raises(InvalidConfig):
            gdcv.generate(gdcv.SimModel(n=2, p=2, noise=gdcv.StudentT(dof=2.0)))

    def test_ar_parameter_guard(self):
        with pytest.raises(InvalidConfig):
            gdcv.generate(gdcv.SimModel(n=2, p=2, covariance=gdcv.AR(rho=1.0)))


class TestDeterminism:
    def test_same_seed_bitwise_identical(self):
        model = gdcv.SimModel(
            n=30, p=20, covariance=gdcv.AR(0.25),
            signal=gdcv.RandomSphere(2.0), noise=gdcv.StudentT(5.0), seed=42,
        )
        a, at, _ = gdcv.generate(model, extra_test=10)
        b, bt, _ = gdcv.generate(model, extra_test=10)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.response, b.response)
        assert np.array_equal(at.features, bt.features)

    def test_training_draw_independent_of_test_size(self):
        model = gdcv.SimModel(n=10, p=4, seed=7)
        a, _, _ = gdcv.generate(model, extra_test=0)
        b, _, _ = gdcv.generate(model, extra_test=500)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.response, b.response)

    def test_fresh_pairs_reproducible_and_distinct_from_training(self):
        model = gdcv.SimModel(n=10, p=4, seed=7)
        data, _, truth = gdcv.generate(model)
        X1, y1 = gdcv.sample_pairs(model, truth, 10, seed=7)
        X2, y2 = gdcv.sample_pairs(model, truth, 10, seed=7)
        assert np.array_equal(X1, X2) and np.array_equal(y1, y2)
        assert not np.array_equal(X1, data.features)


class TestValidation:
    def test_bad_sizes(self):
        with pytest.raises(InvalidConfig):
            gdcv.generate(gdcv.SimModel(n=0, p=2))

    def test_asymmetric_quadratic_matrix(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(InvalidConfig):
            gdcv.generate(
                gdcv.SimModel(n=3, p=2, response=gdcv.LinearPlusQuadratic(A))
            )
