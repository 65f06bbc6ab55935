"""Gaussian-process core: kernel, exact inference, evidence, fitting."""

import math

import numpy as np
import pytest

from mmeopt.errors import NumericalError
from mmeopt.gp import (GPParams, GPPosterior, ParamBounds, as_points,
                       chol_with_jitter, default_params, fit_params,
                       log_evidence, sqexp_kernel)

from conftest import draw_from_prior


class TestAsPoints:
    def test_scalar_becomes_single_point(self):
        np.testing.assert_array_equal(as_points(2.0), [[2.0]])

    def test_1d_without_dim_is_scalar_column(self):
        np.testing.assert_array_equal(as_points([1.0, 2.0, 3.0]).shape, (3, 1))

    def test_1d_with_dim_is_single_point(self):
        np.testing.assert_array_equal(as_points([1.0, 2.0], dim=2).shape,
                                      (1, 2))

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            as_points(np.zeros((4, 3)), dim=2)

    def test_3d_input_raises(self):
        with pytest.raises(ValueError, match="at most 2-D"):
            as_points(np.zeros((2, 2, 2)))


class TestGPParams:
    def test_vector_round_trip(self):
        p = GPParams(lengthscale=0.7, signal_variance=2.0,
                     noise_variance=0.01, mean_const=-1.5)
        q = GPParams.from_vector(p.to_vector())
        np.testing.assert_allclose(
            [q.lengthscale, q.signal_variance, q.noise_variance, q.mean_const],
            [p.lengthscale, p.signal_variance, p.noise_variance, p.mean_const],
            rtol=1e-12)

    @pytest.mark.parametrize("kwargs", [
        dict(lengthscale=0.0),
        dict(lengthscale=-1.0),
        dict(signal_variance=0.0),
        dict(noise_variance=-1e-9),
        dict(mean_const=float("nan")),
    ])
    def test_invalid_values_raise(self, kwargs):
        base = dict(lengthscale=1.0, signal_variance=1.0,
                    noise_variance=0.1, mean_const=0.0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            GPParams(**base)


class TestSqexpKernel:
    def setup_method(self):
        self.params = GPParams(lengthscale=0.5, signal_variance=2.0,
                               noise_variance=0.1, mean_const=0.0)

    def test_diagonal_is_signal_variance(self):
        X = np.linspace(0, 1, 7).reshape(-1, 1)
        K = sqexp_kernel(X, X, self.params)
        np.testing.assert_allclose(np.diag(K), 2.0, rtol=1e-14)

    def test_value_at_one_lengthscale(self):
        K = sqexp_kernel([[0.0]], [[0.5]], self.params)
        np.testing.assert_allclose(K[0, 0], 2.0 * math.exp(-0.5), rtol=1e-14)

    def test_symmetry_and_positive_semidefinite(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(-1, 1, size=(12, 2))
        K = sqexp_kernel(X, X, self.params)
        np.testing.assert_allclose(K, K.T, atol=1e-15)
        assert np.min(np.linalg.eigvalsh(K)) > -1e-10

    def test_empty_inputs(self):
        assert sqexp_kernel(np.zeros((0, 1)), np.zeros((3, 1)),
                            self.params).shape == (0, 3)


class TestCholWithJitter:
    def test_identity_uses_base_jitter(self):
        L, jitter = chol_with_jitter(np.eye(3), signal_variance=1.0)
        np.testing.assert_allclose(L @ L.T, np.eye(3) * (1 + jitter),
                                   rtol=1e-12)
        assert jitter == pytest.approx(1e-10)

    def test_slightly_indefinite_matrix_escalates(self):
        mat = np.ones((4, 4)) - 2e-9 * np.eye(4)
        L, jitter = chol_with_jitter(mat, signal_variance=1.0)
        assert jitter > 1e-10
        np.testing.assert_allclose(L @ L.T, mat + jitter * np.eye(4),
                                   atol=1e-12)

    def test_indefinite_matrix_raises(self):
        with pytest.raises(NumericalError, match="Cholesky"):
            chol_with_jitter(-np.eye(3), signal_variance=1.0)


class TestGPPosterior:
    def setup_method(self):
        self.params = GPParams(lengthscale=0.8, signal_variance=1.2,
                               noise_variance=0.0, mean_const=0.5)
        self.X = np.array([[-1.0], [0.0], [1.2]])
        self.y = np.array([0.3, -0.7, 1.1])
        self.post = GPPosterior(self.X, self.y, self.params)

    def test_noiseless_interpolation(self):
        mean, var = self.post.predict(self.X)
        np.testing.assert_allclose(mean, self.y, atol=1e-6)
        np.testing.assert_allclose(var, 0.0, atol=1e-6)

    def test_prior_reversion_far_from_data(self):
        mean, var = self.post.predict([[40.0]])
        np.testing.assert_allclose(mean, 0.5, atol=1e-9)
        np.testing.assert_allclose(var, 1.2, rtol=1e-9)

    def test_empty_training_set_gives_prior(self):
        post = GPPosterior(np.zeros((0, 1)), [], self.params)
        mean, cov = post.predict([[0.0], [0.3]], full_cov=True)
        np.testing.assert_allclose(mean, 0.5)
        np.testing.assert_allclose(
            cov, sqexp_kernel([[0.0], [0.3]], [[0.0], [0.3]], self.params))

    def test_full_cov_diagonal_matches_variances(self, small_posterior):
        Q = np.linspace(0, 3, 9).reshape(-1, 1)
        _, var = small_posterior.predict(Q)
        _, cov = small_posterior.predict(Q, full_cov=True)
        np.testing.assert_allclose(np.diag(cov), var, atol=1e-10)

    def test_cov_column_matches_full_covariance(self, small_posterior):
        Q = np.linspace(0, 3, 9).reshape(-1, 1)
        _, cov = small_posterior.predict(Q, full_cov=True)
        col = small_posterior.cov_column(Q, Q[4])
        np.testing.assert_allclose(col, cov[:, 4], atol=1e-10)

    def test_matches_direct_inverse_oracle(self):
        """Cholesky pipeline vs an explicit matrix inverse, random cases."""
        rng = np.random.default_rng(17)
        for _ in range(10):
            d = int(rng.integers(1, 3))
            n = int(rng.integers(2, 20))
            params = GPParams(lengthscale=float(rng.uniform(0.3, 2.0)),
                              signal_variance=float(rng.uniform(0.5, 3.0)),
                              noise_variance=float(rng.uniform(1e-3, 0.3)),
                              mean_const=float(rng.uniform(-1, 1)))
            X = rng.uniform(-2, 2, size=(n, d))
            y = draw_from_prior(X, params, rng)
            post = GPPosterior(X, y, params)
            Q = rng.uniform(-2, 2, size=(7, d))

            Kxx = sqexp_kernel(X, X, params)
            Kxx[np.diag_indices_from(Kxx)] += params.noise_variance + post.jitter
            Kinv = np.linalg.inv(Kxx)
            Kqx = sqexp_kernel(Q, X, params)
            mean_o = params.mean_const + Kqx @ Kinv @ (y - params.mean_const)
            cov_o = sqexp_kernel(Q, Q, params) - Kqx @ Kinv @ Kqx.T

            mean, cov = post.predict(Q, full_cov=True)
            np.testing.assert_allclose(mean, mean_o, atol=1e-8)
            np.testing.assert_allclose(cov, cov_o, atol=1e-8)

    def test_observing_more_never_raises_variance(self, small_posterior):
        """With fixed hyperparameters, conditioning shrinks variance."""
        post = small_posterior
        rng = np.random.default_rng(3)
        Q = np.linspace(0, 3, 15).reshape(-1, 1)
        _, var_before = post.predict(Q)
        x_new = np.array([[1.7]])
        y_new = float(draw_from_prior(x_new, post.params, rng)[0])
        grown = GPPosterior(np.vstack([post.X, x_new]),
                            np.append(post.y, y_new), post.params)
        _, var_after = grown.predict(Q)
        assert np.all(var_after <= var_before + 1e-10)

    def test_variance_never_exceeds_prior(self, small_posterior):
        Q = np.linspace(0, 3, 40).reshape(-1, 1)
        _, var = small_posterior.predict(Q)
        assert np.all(var <= small_posterior.params.signal_variance + 1e-10)

    def test_covariance_eigenvalues_near_nonnegative(self, small_posterior):
        Q = np.linspace(0, 3, 25).reshape(-1, 1)
        _, cov = small_posterior.predict(Q, full_cov=True)
        eigs = np.linalg.eigvalsh(cov)
        assert eigs.min() >= -1e-8 * small_posterior.params.signal_variance

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError, match="length mismatch"):
            GPPosterior([[0.0], [1.0]], [1.0], self.params)

    def test_training_arrays_read_only(self):
        with pytest.raises(ValueError):
            self.post.X[0, 0] = 99.0


class TestSampling:
    def test_same_seed_identical(self, small_posterior):
        Q = np.linspace(0, 3, 8).reshape(-1, 1)
        a = small_posterior.sample(Q, 5, np.random.default_rng(9))
        b = small_posterior.sample(Q, 5, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_shape(self, small_posterior):
        Q = np.linspace(0, 3, 8).reshape(-1, 1)
        assert small_posterior.sample(Q, 11, np.random.default_rng(0)).shape \
            == (11, 8)

    def test_moments_match_predict(self, small_posterior):
        """Sample mean and covariance converge to the analytic posterior."""
        Q = np.linspace(0, 3, 5).reshape(-1, 1)
        draws = small_posterior.sample(Q, 200_000, np.random.default_rng(4))
        mean, cov = small_posterior.predict(Q, full_cov=True)
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.02)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)

    def test_bad_size_raises(self, small_posterior):
        with pytest.raises(ValueError, match="size"):
            small_posterior.sample([[0.0]], 0, np.random.default_rng(0))

    def test_pinned_point_draws_collapse_to_mean(self):
        """At a noiselessly observed point draws equal the mean up to the
        factorization jitter (std 1e-5 for unit signal variance)."""
        params = GPParams(lengthscale=0.5, signal_variance=1.0,
                          noise_variance=0.0, mean_const=0.0)
        post = GPPosterior([[0.2], [1.0]], [0.4, -0.3], params)
        draws = post.sample([[1.0]], 50, np.random.default_rng(6))
        np.testing.assert_allclose(draws, -0.3, atol=1e-4)


class TestLogEvidence:
    def test_matches_direct_formula(self):
        """Evidence value vs slogdet + explicit quadratic form."""
        params = GPParams(lengthscale=0.6, signal_variance=1.4,
                          noise_variance=0.09, mean_const=0.2)
        rng = np.random.default_rng(21)
        X = rng.uniform(-1, 1, size=(14, 2))
        y = draw_from_prior(X, params, rng)
        value, _ = log_evidence(X, y, params)

        K = sqexp_kernel(X, X, params)
        K[np.diag_indices_from(K)] += (params.noise_variance
                                       + 1e-10 * params.signal_variance)
        r = y - params.mean_const
        _, logdet = np.linalg.slogdet(K)
        direct = -0.5 * (r @ np.linalg.solve(K, r) + logdet
                         + 14 * math.log(2 * math.pi))
        np.testing.assert_allclose(value, direct, rtol=1e-10)

    def test_gradient_matches_finite_differences(self):
        params = GPParams(lengthscale=0.5, signal_variance=2.0,
                          noise_variance=0.05, mean_const=-0.4)
        rng = np.random.default_rng(31)
        X = rng.uniform(-1, 1, size=(10, 1))
        y = draw_from_prior(X, params, rng)
        _, grad = log_evidence(X, y, params)
        z = params.to_vector()
        h = 1e-6
        for i in range(4):
            zp, zm = z.copy(), z.copy()
            zp[i] += h
            zm[i] -= h
            vp, _ = log_evidence(X, y, GPParams.from_vector(zp))
            vm, _ = log_evidence(X, y, GPParams.from_vector(zm))
            np.testing.assert_allclose(grad[i], (vp - vm) / (2 * h),
                                       rtol=1e-5, atol=1e-7)

    def test_empty_data(self):
        value, grad = log_evidence(np.zeros((0, 1)), [], GPParams(
            lengthscale=1.0, signal_variance=1.0, noise_variance=0.1,
            mean_const=0.0))
        assert value == 0.0
        np.testing.assert_array_equal(grad, np.zeros(4))

    def test_single_residual_free_observation(self):
        """n = 1 with y at the prior mean and unit total variance reduces
        the density to the plain Gaussian normalizer -log(2 pi)/2."""
        params = GPParams(lengthscale=1.0, signal_variance=0.6,
                          noise_variance=0.4, mean_const=1.7)
        value, _ = log_evidence([[0.3]], [1.7], params)
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi),
                                      rel=1e-9)


class TestParamBounds:
    def test_from_data_scales(self):
        X = np.array([[0.0], [2.0]])
        y = np.array([1.0, 3.0])
        b = ParamBounds.from_data(X, y)
        assert b.lengthscale == (pytest.approx(2e-3), pytest.approx(2e3))
        assert b.signal_variance[0] == pytest.approx(1e-3)

    def test_clip(self):
        b = ParamBounds(lengthscale=(0.1, 1.0), signal_variance=(0.1, 1.0),
                        noise_variance=(0.1, 1.0), mean_const=(-1.0, 1.0))
        p = b.clip(GPParams(lengthscale=5.0, signal_variance=0.5,
                            noise_variance=0.01, mean_const=-3.0))
        assert (p.lengthscale, p.noise_variance, p.mean_const) == (1.0, 0.1, -1.0)

    def test_x_scale_override(self):
        X = np.array([[0.0], [1e-6]])  # tiny extent; domain scale wins
        b = ParamBounds.from_data(X, [0.0, 1.0], x_scale=3.0)
        assert b.lengthscale[1] == pytest.approx(3e3)


class TestFitParams:
    def test_deterministic_given_seed(self):
        rng_data = np.random.default_rng(2)
        params = GPParams(lengthscale=0.5, signal_variance=1.0,
                          noise_variance=0.04, mean_const=0.0)
        X = rng_data.uniform(0, 3, size=(15, 1))
        y = draw_from_prior(X, params, rng_data)
        a = fit_params(X, y, rng=np.random.default_rng(7))
        b = fit_params(X, y, rng=np.random.default_rng(7))
        assert a == b

    def test_never_worse_than_warm_start(self):
        rng = np.random.default_rng(8)
        params = GPParams(lengthscale=0.5, signal_variance=1.0,
                          noise_variance=0.04, mean_const=0.0)
        X = rng.uniform(0, 3, size=(12, 1))
        y = draw_from_prior(X, params, rng)
        warm = GPParams(lengthscale=0.3, signal_variance=0.8,
                        noise_variance=0.1, mean_const=0.1)
        fitted = fit_params(X, y, rng=np.random.default_rng(1),
                            warm_start=warm)
        assert log_evidence(X, y, fitted)[0] >= log_evidence(X, y, warm)[0]

    def test_respects_bounds(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 3, size=(10, 1))
        y = rng.standard_normal(10)
        bounds = ParamBounds(lengthscale=(0.2, 0.4),
                             signal_variance=(0.5, 2.0),
                             noise_variance=(0.01, 0.1),
                             mean_const=(-0.5, 0.5))
        p = fit_params(X, y, rng=np.random.default_rng(0), bounds=bounds)
        assert 0.2 <= p.lengthscale <= 0.4
        assert 0.5 <= p.signal_variance <= 2.0
        assert 0.01 <= p.noise_variance <= 0.1
        assert -0.5 <= p.mean_const <= 0.5

    def test_recovers_noise_variance_within_factor_two(self):
        """Median over 10 synthetic datasets from a known generator."""
        true = GPParams(lengthscale=0.5, signal_variance=1.0,
                        noise_variance=0.01, mean_const=0.0)  # noise std 0.1
        ratios = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.uniform(0, 5, size=(60, 1))
            y = draw_from_prior(X, true, rng)
            fitted = fit_params(X, y, rng=np.random.default_rng(100 + seed))
            ratios.append(fitted.noise_variance / true.noise_variance)
        median = float(np.median(ratios))
        assert 0.5 <= median <= 2.0

    def test_too_few_observations_raise(self):
        with pytest.raises(ValueError, match="n >= 2"):
            fit_params([[0.0]], [1.0], rng=np.random.default_rng(0))


class TestDefaultParams:
    def test_lengthscale_fraction_of_diagonal(self):
        p = default_params([3.0, 4.0])
        assert p.lengthscale == pytest.approx(1.0)  # 0.2 * 5

    def test_mean_tracks_observations(self):
        assert default_params([1.0], y=[2.0, 4.0]).mean_const == 3.0
        assert default_params([1.0]).mean_const == 0.0
