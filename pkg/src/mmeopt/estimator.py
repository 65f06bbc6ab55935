"""Scikit-learn estimator interface to the GP surrogate.

Wraps the exact-inference machinery in a fit/predict estimator so the
surrogate can sit in sklearn pipelines, grid searches, and clone-based
tooling. The acquisition and experiment layers use the functional API
directly; this wrapper adds nothing they need.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .gp import GPParams, GPPosterior, ParamBounds, fit_params, log_evidence


class GPRegressor(RegressorMixin, BaseEstimator):
    """Gaussian-process regression, squared-exponential kernel, constant mean.

    With ``optimize=True`` (default) the kernel hyperparameters, the noise
    variance, and the constant mean are refit by evidence maximization at
    ``fit`` time, using the constructor values as the warm start. With
    ``optimize=False`` the constructor values are used as-is.

    Parameters
    ----------
    lengthscale, signal_variance, noise_variance, mean_const : float
        Initial (or fixed) hyperparameters.
    optimize : bool
        Whether ``fit`` maximizes the log marginal likelihood.
    n_restarts : int
        Random multi-start count for the evidence optimization.
    random_state : int, Generator or None
        Seeds the restart draws; None draws fresh entropy.
    """

    def __init__(self, lengthscale=1.0, signal_variance=1.0,
                 noise_variance=1e-2, mean_const=0.0, optimize=True,
                 n_restarts=5, random_state=None):
        self.lengthscale = lengthscale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance
        self.mean_const = mean_const
        self.optimize = optimize
        self.n_restarts = n_restarts
        self.random_state = random_state

    def _initial_params(self) -> GPParams:
        return GPParams(lengthscale=self.lengthscale,
                        signal_variance=self.signal_variance,
                        noise_variance=self.noise_variance,
                        mean_const=self.mean_const)

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        y = np.asarray(y, dtype=float)
        if self.optimize and X.shape[0] >= 2:
            rng = np.random.default_rng(self.random_state)
            self.params_ = fit_params(
                X, y, rng=rng, n_restarts=self.n_restarts,
                bounds=ParamBounds.from_data(X, y),
                warm_start=self._initial_params())
        else:
            self.params_ = self._initial_params()
        self.posterior_ = GPPosterior(X, y, self.params_)
        self.log_marginal_likelihood_ = self.log_marginal_likelihood()
        return self

    def predict(self, X, return_std=False, return_cov=False):
        """Posterior mean, optionally with pointwise std or full covariance."""
        check_is_fitted(self)
        if return_std and return_cov:
            raise ValueError("return_std and return_cov are exclusive")
        X = validate_data(self, X, reset=False)
        mean, second = self.posterior_.predict(X, full_cov=return_cov)
        if return_cov:
            return mean, second
        if return_std:
            return mean, np.sqrt(second)
        return mean

    def sample_y(self, X, n_samples=1, random_state=None):
        """Joint posterior draws at X, shape (n_samples, n_points)."""
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        rng = np.random.default_rng(random_state)
        return self.posterior_.sample(X, n_samples, rng)

    def log_marginal_likelihood(self, params: GPParams | None = None) -> float:
        """Evidence of the training data under ``params`` (fitted by default)."""
        check_is_fitted(self, "posterior_")
        value, _ = log_evidence(self.posterior_.X, self.posterior_.y,
                                params if params is not None else self.params_)
        return value
