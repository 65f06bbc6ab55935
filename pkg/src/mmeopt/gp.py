"""Gaussian-process regression with a squared-exponential kernel and constant mean.

Everything here is exact (Cholesky-based) inference following Rasmussen &
Williams. Hyperparameters are point estimates obtained by maximizing the
log marginal likelihood (evidence) with multi-start L-BFGS-B; the noise
variance is fitted alongside the kernel parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import NumericalError

# Diagonal inflation relative to signal_variance: always add BASE_JITTER,
# escalate x10 on factorization failure up to MAX_JITTER before giving up.
BASE_JITTER = 1e-10
MAX_JITTER = 1e-6


@dataclass(frozen=True)
class GPParams:
    """Kernel and mean hyperparameters of the surrogate.

    lengthscale and signal_variance parameterize the squared-exponential
    kernel, noise_variance is the observation-noise variance, and
    mean_const is the constant prior mean.
    """

    lengthscale: float
    signal_variance: float
    noise_variance: float
    mean_const: float

    def __post_init__(self):
        vals = (self.lengthscale, self.signal_variance, self.noise_variance,
                self.mean_const)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite hyperparameter in {vals}")
        if self.lengthscale <= 0:
            raise ValueError(f"lengthscale must be > 0, got {self.lengthscale}")
        if self.signal_variance <= 0:
            raise ValueError(
                f"signal_variance must be > 0, got {self.signal_variance}")
        if self.noise_variance < 0:
            raise ValueError(
                f"noise_variance must be >= 0, got {self.noise_variance}")

    def to_vector(self) -> np.ndarray:
        """Pack as [log lengthscale, log signal_variance, log noise_variance,
        mean_const] (the optimizer's parameterization)."""
        return np.array([
            math.log(self.lengthscale),
            math.log(self.signal_variance),
            math.log(self.noise_variance) if self.noise_variance > 0 else -np.inf,
            self.mean_const,
        ])

    @staticmethod
    def from_vector(z) -> "GPParams":
        z = np.asarray(z, dtype=float)
        return GPParams(
            lengthscale=float(np.exp(z[0])),
            signal_variance=float(np.exp(z[1])),
            noise_variance=float(np.exp(z[2])),
            mean_const=float(z[3]),
        )


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce input to a float64 (n, d) point array.

    1-D input is a column of scalar points when ``dim`` is absent or 1,
    and a single d-dimensional point when ``dim`` > 1. Raises ValueError
    on a dimension mismatch against ``dim``.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        if dim is not None and dim > 1:
            a = a.reshape(1, -1)
        else:
            a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ValueError(f"points must be at most 2-D, got shape {a.shape}")
    if dim is not None and a.shape[1] != dim:
        raise ValueError(
            f"point dimension mismatch: expected {dim}, got {a.shape[1]}")
    return a


def sqexp_kernel(a, b, params: GPParams) -> np.ndarray:
    """Squared-exponential covariance matrix between point sets.

    k(x, x') = signal_variance * exp(-||x - x'||^2 / (2 * lengthscale^2)).
    Accepts (n, d) and (m, d) arrays (or 1-D arrays of scalar points) and
    returns the (n, m) Gram matrix.
    """
    A = as_points(a)
    B = as_points(b, dim=A.shape[1])
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    sq = cdist(A, B, "sqeuclidean")
    return params.signal_variance * np.exp(-sq / (2.0 * params.lengthscale**2))


def chol_with_jitter(mat: np.ndarray, signal_variance: float,
                     start: float = BASE_JITTER) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``mat + jitter*I`` with jitter escalation.

    Starts at ``start * signal_variance`` and multiplies by 10 until the
    factorization succeeds or the jitter exceeds MAX_JITTER * signal_variance.
    Returns the factor and the jitter that was used.
    """
    n = mat.shape[0]
    if n == 0:
        return np.zeros((0, 0)), start * signal_variance
    jitter = start * signal_variance
    cap = MAX_JITTER * signal_variance
    eye = np.eye(n)
    while True:
        try:
            L = cholesky(mat + jitter * eye, lower=True)
            return L, jitter
        except LinAlgError:
            jitter *= 10.0
            if jitter > cap * (1 + 1e-12):
                raise NumericalError(
                    f"Cholesky factorization failed for a {n}x{n} system even "
                    f"with jitter {cap:g} (signal_variance={signal_variance:g})"
                ) from None


def _check_xy(X, y, dim=None):
    X = as_points(X, dim=dim)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError(
            f"points/observations length mismatch: {X.shape[0]} vs {y.shape[0]}")
    return X, y


class GPPosterior:
    """Immutable fitted GP state answering joint mean/covariance queries.

    Holds the training set, the lower Cholesky factor of
    K + (noise_variance + jitter) I, and the precomputed weight vector
    (K + noise_variance I)^-1 (y - mean_const). Construction is the only
    mutating step; instances are then safe to share across threads.
    """

    def __init__(self, X, y, params: GPParams):
        X, y = _check_xy(X, y)
        self.X = X
        self.y = y
        self.params = params
        self.X.setflags(write=False)
        self.y.setflags(write=False)
        n = X.shape[0]
        if n == 0:
            self.chol_factor = np.zeros((0, 0))
            self.weights = np.zeros(0)
            self.jitter = BASE_JITTER * params.signal_variance
            return
        K = sqexp_kernel(X, X, params)
        try:
            self.chol_factor, self.jitter = chol_with_jitter(
                K + params.noise_variance * np.eye(n), params.signal_variance)
        except NumericalError as err:
            raise NumericalError(
                f"posterior factorization failed: n={n}, params={params}"
            ) from err
        self.weights = cho_solve((self.chol_factor, True),
                                 y - params.mean_const)

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        # empty training sets must be shaped (0, d) to carry the dimension
        return self.X.shape[1]

    def predict(self, query, full_cov: bool = False):
        """Joint posterior of the latent (noise-free) function at ``query``.

        Returns (mean, variances) by default or (mean, covariance matrix)
        when ``full_cov`` is set. Variances are clamped at zero from below;
        the full covariance is symmetrized with its diagonal clamped at zero.
        """
        Q = as_points(query, dim=self.dim)
        if Q.shape[0] == 0:
            raise ValueError("query must be non-empty")
        p = self.params
        mean = np.full(Q.shape[0], p.mean_const)
        if self.n_obs == 0:
            if full_cov:
                return mean, sqexp_kernel(Q, Q, p)
            return mean, np.full(Q.shape[0], p.signal_variance)
        Kqx = sqexp_kernel(Q, self.X, p)
        mean = mean + Kqx @ self.weights
        V = solve_triangular(self.chol_factor, Kqx.T, lower=True)
        if full_cov:
            cov = sqexp_kernel(Q, Q, p) - V.T @ V
            cov = 0.5 * (cov + cov.T)
            d = np.diagonal(cov).copy()
            np.fill_diagonal(cov, np.maximum(d, 0.0))
            return mean, cov
        var = p.signal_variance - np.einsum("ij,ij->j", V, V)
        return mean, np.maximum(var, 0.0)

    def cov_column(self, query, ref_point) -> np.ndarray:
        """Posterior covariance Cov[f(q), f(ref_point)] for every q in query."""
        Q = as_points(query, dim=self.dim)
        r = as_points(ref_point, dim=self.dim)
        p = self.params
        col = sqexp_kernel(Q, r, p)[:, 0]
        if self.n_obs == 0:
            return col
        Vq = solve_triangular(self.chol_factor,
                              sqexp_kernel(self.X, Q, p), lower=True)
        vr = solve_triangular(self.chol_factor,
                              sqexp_kernel(self.X, r, p), lower=True)
        return col - Vq.T @ vr[:, 0]

    def sample(self, query, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` joint posterior samples at ``query``; shape (size, n_query).

        Uses mean + L z with L a Cholesky factor of the posterior covariance
        (tiny escalating diagonal jitter keeps degenerate directions pinned
        to the mean).
        """
        if size < 1:
            raise ValueError(f"sample size must be >= 1, got {size}")
        mean, cov = self.predict(query, full_cov=True)
        L, _ = chol_with_jitter(cov, self.params.signal_variance, start=1e-12)
        z = rng.standard_normal((mean.shape[0], size))
        return (mean[:, None] + L @ z).T


def log_evidence(X, y, params: GPParams):
    """Log marginal likelihood of the data and its exact gradient.

    The gradient is taken over [log lengthscale, log signal_variance,
    log noise_variance, mean_const]. The stabilizing diagonal jitter
    (proportional to signal_variance) is part of the modeled covariance so
    value and gradient stay mutually consistent. n = 0 gives (0, zeros).
    """
    X, y = _check_xy(X, y)
    n = X.shape[0]
    if n == 0:
        return 0.0, np.zeros(4)
    p = params
    sq = cdist(X, X, "sqeuclidean")
    K = p.signal_variance * np.exp(-sq / (2.0 * p.lengthscale**2))
    try:
        L, jitter = chol_with_jitter(K + p.noise_variance * np.eye(n),
                                     p.signal_variance)
    except NumericalError as err:
        raise NumericalError(
            f"evidence factorization failed: n={n}, params={p}") from err
    r = y - p.mean_const
    alpha = cho_solve((L, True), r)
    value = (-0.5 * float(r @ alpha)
             - float(np.sum(np.log(np.diagonal(L))))
             - 0.5 * n * math.log(2.0 * math.pi))
    Kinv = cho_solve((L, True), np.eye(n))
    A = np.outer(alpha, alpha) - Kinv
    grad = np.empty(4)
    grad[0] = 0.5 * float(np.sum(A * (K * (sq / p.lengthscale**2))))
    # jitter scales with signal_variance, hence appears in this derivative
    grad[1] = 0.5 * (float(np.sum(A * K)) + jitter * float(np.trace(A)))
    grad[2] = 0.5 * p.noise_variance * float(np.trace(A))
    grad[3] = float(np.sum(alpha))
    return value, grad


@dataclass(frozen=True)
class ParamBounds:
    """Box constraints for evidence optimization, one (low, high) per field."""

    lengthscale: tuple[float, float]
    signal_variance: tuple[float, float]
    noise_variance: tuple[float, float]
    mean_const: tuple[float, float]

    @staticmethod
    def from_data(X, y, x_scale: float | None = None) -> "ParamBounds":
        """Scale-aware default box: [1e-3, 1e3] x the data scales.

        ``x_scale`` overrides the input-space scale (callers that know the
        search domain should pass its diagonal; the fallback is the extent
        of the observed points).
        """
        X, y = _check_xy(X, y)
        if x_scale is None:
            x_scale = float(np.max(np.ptp(X, axis=0))) if X.shape[0] > 1 else 0.0
        if x_scale <= 0:
            x_scale = 1.0
        y_var = float(np.var(y)) if y.size else 0.0
        y_var = max(y_var, 1e-4)
        center = float(np.mean(y)) if y.size else 0.0
        spread = max(float(np.std(y)) if y.size else 0.0, 1.0)
        return ParamBounds(
            lengthscale=(1e-3 * x_scale, 1e3 * x_scale),
            signal_variance=(1e-3 * y_var, 1e3 * y_var),
            noise_variance=(1e-3 * y_var, 1e3 * y_var),
            mean_const=(center - 1e3 * spread, center + 1e3 * spread),
        )

    def as_list(self):
        return [self.lengthscale, self.signal_variance, self.noise_variance,
                self.mean_const]

    def clip(self, params: GPParams) -> GPParams:
        (l_lo, l_hi), (s_lo, s_hi), (n_lo, n_hi), (m_lo, m_hi) = self.as_list()
        return GPParams(
            lengthscale=float(np.clip(params.lengthscale, l_lo, l_hi)),
            signal_variance=float(np.clip(params.signal_variance, s_lo, s_hi)),
            noise_variance=float(np.clip(params.noise_variance, n_lo, n_hi)),
            mean_const=float(np.clip(params.mean_const, m_lo, m_hi)),
        )


def default_params(domain_lengths, y=None) -> GPParams:
    """Fallback hyperparameters used before two observations exist.

    Lengthscale is 20% of the domain-box diagonal; the mean is 0 with no
    observations and the single observed value with one.
    """
    lengths = np.atleast_1d(np.asarray(domain_lengths, dtype=float))
    diag = float(np.sqrt(np.sum(lengths**2)))
    if diag <= 0:
        diag = 1.0
    y = np.asarray([] if y is None else y, dtype=float).reshape(-1)
    mean = float(np.mean(y)) if y.size >= 1 else 0.0
    return GPParams(lengthscale=0.2 * diag, signal_variance=1.0,
                    noise_variance=0.01, mean_const=mean)


def _neg_evidence(z, X, y):
    try:
        value, grad = log_evidence(X, y, GPParams.from_vector(z))
    except NumericalError:
        return 1e25, np.zeros(4)
    if not math.isfinite(value):
        return 1e25, np.zeros(4)
    return -value, -grad


def fit_params(X, y, rng: np.random.Generator, n_restarts: int = 5,
               bounds: ParamBounds | None = None,
               warm_start: GPParams | None = None) -> GPParams:
    """Evidence-optimized hyperparameters via multi-start L-BFGS-B.

    Runs bounded quasi-Newton ascents of the log marginal likelihood in
    [log lengthscale, log signal_variance, log noise_variance, mean_const]
    space from ``n_restarts`` random initializations inside ``bounds`` plus
    one deterministic start (``warm_start`` when given). The best endpoint
    or initialization by evidence wins, so the result is never worse than
    any starting point. Deterministic for a given generator state.

    Requires at least two observations; raises NumericalError carrying the
    best partial result if every start fails.
    """
    X, y = _check_xy(X, y)
    if X.shape[0] < 2:
        raise ValueError(
            f"hyperparameter fitting needs n >= 2 observations, got {X.shape[0]}")
    if n_restarts < 1:
        raise ValueError(f"n_restarts must be >= 1, got {n_restarts}")
    if bounds is None:
        bounds = ParamBounds.from_data(X, y)

    x_extent = float(np.max(np.ptp(X, axis=0)))
    first = warm_start if warm_start is not None else GPParams(
        lengthscale=max(0.2 * max(x_extent, 1e-3), bounds.lengthscale[0]),
        signal_variance=max(float(np.var(y)), 1e-4),
        noise_variance=max(0.01 * max(float(np.var(y)), 1e-4),
                           bounds.noise_variance[0]),
        mean_const=float(np.mean(y)),
    )
    starts = [bounds.clip(first)]
    (l_lo, l_hi), (s_lo, s_hi), (n_lo, n_hi), (m_lo, m_hi) = bounds.as_list()
    log_boxes = [(math.log(l_lo), math.log(l_hi)),
                 (math.log(s_lo), math.log(s_hi)),
                 (math.log(n_lo), math.log(n_hi))]
    # random restarts sampled away from the box edges (one decade in)
    for _ in range(n_restarts):
        draw = [rng.uniform(lo + min(math.log(10), 0.45 * (hi - lo)),
                            hi - min(math.log(10), 0.45 * (hi - lo)))
                for lo, hi in log_boxes]
        m_center = float(np.mean(y))
        m_span = max(float(np.std(y)), 1e-3)
        draw.append(float(np.clip(rng.uniform(m_center - 2 * m_span,
                                              m_center + 2 * m_span),
                                  m_lo, m_hi)))
        starts.append(GPParams.from_vector(draw))

    z_bounds = log_boxes + [(m_lo, m_hi)]
    best_value = -np.inf
    best_params = None
    n_failed = 0
    for start in starts:
        z0 = np.clip(start.to_vector(),
                     [b[0] for b in z_bounds], [b[1] for b in z_bounds])
        v0, _ = _neg_evidence(z0, X, y)
        if v0 < 1e25 and -v0 > best_value:
            best_value, best_params = -v0, GPParams.from_vector(z0)
        try:
            res = minimize(_neg_evidence, z0, args=(X, y), jac=True,
                           method="L-BFGS-B", bounds=z_bounds)
        except (ValueError, FloatingPointError):
            n_failed += 1
            continue
        if math.isfinite(res.fun) and res.fun < 1e25 and -res.fun > best_value:
            best_value, best_params = float(-res.fun), GPParams.from_vector(res.x)
    if best_params is None:
        raise NumericalError(
            f"all {len(starts)} evidence-optimization starts failed "
            f"(n={X.shape[0]})", best_partial=None)
    if n_failed == len(starts):
        raise NumericalError(
            "every evidence-optimization run failed; best initialization "
            f"evidence was {best_value:.6g}", best_partial=best_params)
    # exp(log(bound)) can land one ulp outside the box
    return bounds.clip(best_params)
