"""Acquisition criteria scoring candidate sample locations.

The headline criterion picks the candidate whose (hypothetical) observation
most reduces the entropy of the minimizer distribution, estimated by Monte
Carlo over the candidate's predictive distribution. A deterministic "fast"
variant skips the Monte Carlo by pretending the posterior mean will not
move. Expected improvement, probability of improvement and posterior
variance are the classical baselines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr, xlogy
from scipy.stats import norm

from .gp import GPParams, GPPosterior, as_points, chol_with_jitter, sqexp_kernel
from .minimizer import Grid, _check_variances, proxy_scores_from_moments

CRITERIA = ("mme", "fast_mme", "mei", "pi", "variance")
# criteria whose score is an entropy to be minimized; the rest maximize
MINIMIZING_CRITERIA = ("mme", "fast_mme")

DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class AcquisitionConfig:
    """Criterion choice plus its knobs.

    mc_samples is the number of hypothetical-observation draws per
    candidate for the Monte-Carlo criterion; epsilon is the improvement
    margin used by the improvement-based baselines; cov_mode selects
    whether the proxy keeps the posterior covariance against the incumbent.
    """

    criterion: str = "mme"
    mc_samples: int = 30
    epsilon: float = 0.0
    cov_mode: str = "independent"

    def __post_init__(self):
        crit = self.criterion
        if crit == "kushner_pi":  # accepted alias
            object.__setattr__(self, "criterion", "pi")
            crit = "pi"
        if crit not in CRITERIA:
            raise ValueError(
                f"unknown criterion {self.criterion!r}; expected one of {CRITERIA}")
        if crit == "mme" and self.mc_samples < 1:
            raise ValueError(
                f"mc_samples must be >= 1 for the Monte-Carlo criterion, "
                f"got {self.mc_samples}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.cov_mode not in ("independent", "with_covariance"):
            raise ValueError(f"unknown cov_mode {self.cov_mode!r}")

    @property
    def direction(self) -> str:
        return "minimize" if self.criterion in MINIMIZING_CRITERIA else "maximize"


def _expected_proxy_entropy(X, y, params: GPParams, candidate, grid: Grid,
                            cov_mode: str, y_draws: np.ndarray) -> float:
    """Mean proxy entropy over hypothetical observations at ``candidate``.

    The augmented kernel factorization and the posterior (co)variances over
    the grid do not depend on the observed value, so they are computed once;
    only the mean sweep is per-draw.
    """
    X = as_points(X)
    cand = as_points(candidate, dim=X.shape[1])
    X_aug = np.vstack([X, cand]) if X.size else cand
    y = np.asarray(y, dtype=float).reshape(-1)
    n_aug = X_aug.shape[0]
    p = params

    K = sqexp_kernel(X_aug, X_aug, p)
    L, _ = chol_with_jitter(K + p.noise_variance * np.eye(n_aug),
                            p.signal_variance)
    Kqx = sqexp_kernel(grid.points, X_aug, p)
    V = solve_triangular(L, Kqx.T, lower=True)
    var = p.signal_variance - np.einsum("ij,ij->j", V, V)
    var = _check_variances(var, p.signal_variance)

    resid = np.empty((n_aug, y_draws.shape[0]))
    resid[:-1, :] = (y - p.mean_const)[:, None]
    resid[-1, :] = y_draws - p.mean_const
    means = p.mean_const + Kqx @ cho_solve((L, True), resid)

    inc_idx = np.argmin(means, axis=0)
    cov_cols = None
    if cov_mode == "with_covariance":
        cov = sqexp_kernel(grid.points, grid.points, p) - V.T @ V
        cov = 0.5 * (cov + cov.T)
        cov_cols = cov[:, inc_idx]
    scores = proxy_scores_from_moments(means, var, inc_idx, cov_cols)
    probs = scores / scores.sum(axis=0, keepdims=True)
    entropies = -np.sum(xlogy(probs, probs), axis=0)
    return float(np.mean(entropies))


def mme_score(X, y, params: GPParams, candidate, grid: Grid,
              cfg: AcquisitionConfig, rng: np.random.Generator) -> float:
    """Expected minimizer entropy after a hypothetical sample at ``candidate``.

    Draws cfg.mc_samples observation values from the candidate's predictive
    distribution N(mu, latent var + noise var), rebuilds the posterior for
    each with hyperparameters held fixed, recomputes the incumbent there,
    and averages the proxy-distribution entropies. Deterministic given the
    generator seed; lower is better.
    """
    if cfg.mc_samples < 1:
        raise ValueError(
            f"mc_samples must be >= 1, got {cfg.mc_samples}")
    post = GPPosterior(X, y, params)
    mu, var = post.predict(as_points(candidate, dim=post.dim))
    pred_sd = float(np.sqrt(var[0] + params.noise_variance))
    y_draws = mu[0] + pred_sd * rng.standard_normal(cfg.mc_samples)
    return _expected_proxy_entropy(post.X, post.y, params, candidate, grid,
                                   cfg.cov_mode, y_draws)


def fast_mme_score(X, y, params: GPParams, candidate, grid: Grid,
                   cfg: AcquisitionConfig) -> float:
    """Deterministic variant: condition on observing the predictive mean.

    Appending the current predictive mean leaves the posterior mean
    unchanged while contracting the covariance exactly as any observation
    at that location would, so no Monte Carlo over outcomes is needed.
    """
    post = GPPosterior(X, y, params)
    mu, _ = post.predict(as_points(candidate, dim=post.dim))
    return _expected_proxy_entropy(post.X, post.y, params, candidate, grid,
                                   cfg.cov_mode, np.array([mu[0]]))


def _ei_values(mu, sd, incumbent_value: float, epsilon: float) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sd, dtype=float)
    gap = incumbent_value - epsilon - mu
    out = np.maximum(gap, 0.0)
    ok = sd >= DEGENERATE_STD
    if np.any(ok):
        z = gap[ok] / sd[ok]
        out = out.copy()
        out[ok] = gap[ok] * ndtr(z) + sd[ok] * norm.pdf(z)
    return out


def _pi_values(mu, sd, incumbent_value: float, epsilon: float) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sd, dtype=float)
    gap = incumbent_value - epsilon - mu
    step = np.where(gap > 0, 1.0, np.where(gap == 0, 0.5, 0.0))
    ok = sd >= DEGENERATE_STD
    out = step
    if np.any(ok):
        out = step.copy()
        out[ok] = ndtr(gap[ok] / sd[ok])
    return out


def mei_scores(post: GPPosterior, points, incumbent_value: float,
               epsilon: float = 0.0) -> np.ndarray:
    """Closed-form expected improvement below the incumbent, for minimization."""
    mu, var = post.predict(as_points(points, dim=post.dim))
    sd = np.sqrt(np.maximum(var, 0.0))
    return _ei_values(mu, sd, incumbent_value, epsilon)


def mei_score(post: GPPosterior, candidate, incumbent_value: float,
              epsilon: float = 0.0) -> float:
    return float(mei_scores(post, candidate, incumbent_value, epsilon)[0])


def pi_scores(post: GPPosterior, points, incumbent_value: float,
              epsilon: float = 0.0) -> np.ndarray:
    """Probability the latent value falls below incumbent - epsilon."""
    mu, var = post.predict(as_points(points, dim=post.dim))
    sd = np.sqrt(np.maximum(var, 0.0))
    return _pi_values(mu, sd, incumbent_value, epsilon)


def pi_score(post: GPPosterior, candidate, incumbent_value: float,
             epsilon: float = 0.0) -> float:
    return float(pi_scores(post, candidate, incumbent_value, epsilon)[0])


def variance_scores(post: GPPosterior, points) -> np.ndarray:
    """Latent posterior variance (uncertainty-sampling baseline)."""
    _, var = post.predict(as_points(points, dim=post.dim))
    return var


def variance_score(post: GPPosterior, candidate) -> float:
    return float(variance_scores(post, candidate)[0])


def select_next(scores, direction: str) -> int:
    """Extremal index of a finite score vector; smallest index on ties."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("scores must be non-empty")
    bad = np.flatnonzero(~np.isfinite(s))
    if bad.size:
        raise ValueError(
            f"non-finite score {s[bad[0]]!r} at index {int(bad[0])}")
    if direction == "minimize":
        return int(np.argmin(s))
    if direction == "maximize":
        return int(np.argmax(s))
    raise ValueError(f"unknown direction {direction!r}")
