"""Shared fixtures and the acceptance-report terminal section."""

import numpy as np
import pytest

from mmeopt.gp import GPParams, GPPosterior, sqexp_kernel

# One line per acceptance criterion, printed in the terminal summary so
# the verdicts are visible even when every test passes.
_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def add(line: str):
        _ACCEPTANCE_LINES.append(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def draw_from_prior(X, params: GPParams, rng: np.random.Generator):
    """Observations sampled from the model's own prior (with noise)."""
    n = X.shape[0]
    K = sqexp_kernel(X, X, params) + params.noise_variance * np.eye(n)
    K[np.diag_indices_from(K)] += 1e-10 * params.signal_variance
    return params.mean_const + np.linalg.cholesky(K) @ rng.standard_normal(n)


@pytest.fixture
def small_posterior():
    """A well-conditioned 1D posterior on 6 points, fixed hyperparameters."""
    params = GPParams(lengthscale=0.6, signal_variance=1.5,
                      noise_variance=0.05, mean_const=0.3)
    rng = np.random.default_rng(123)
    X = rng.uniform(0.0, 3.0, size=(6, 1))
    y = draw_from_prior(X, params, rng)
    return GPPosterior(X, y, params)
