"""Grid-based approximation of the posterior distribution of the minimizer.

The distribution over "which grid point is the function's minimizer" is
approximated two ways: a cheap normal-CDF proxy built from posterior
moments, and a brute-force histogram of argmins over joint posterior
samples. Entropy and KL divergence of these distributions are the
convergence metrics logged by the experiment loop.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, rel_entr, xlogy

from .errors import NumericalError
from .gp import GPPosterior, as_points

# Variance sums below this are treated as degenerate (limit conventions).
DEGENERATE_VAR = 1e-12


class Grid:
    """Finite rectangular lattice of candidate points over a domain box.

    ``points`` is (n_points, dim) in row-major order with respect to
    ``shape`` (last dimension fastest).
    """

    def __init__(self, points, shape):
        self.points = as_points(points)
        self.shape = tuple(int(s) for s in shape)
        if any(s <= 0 for s in self.shape):
            raise ValueError(f"grid shape must be positive, got {self.shape}")
        if int(np.prod(self.shape)) != self.points.shape[0]:
            raise ValueError(
                f"shape {self.shape} does not match {self.points.shape[0]} points")
        if len(self.shape) != self.points.shape[1]:
            raise ValueError(
                f"shape rank {len(self.shape)} != point dimension "
                f"{self.points.shape[1]}")
        self.points.setflags(write=False)

    @classmethod
    def regular(cls, lower, upper, shape) -> "Grid":
        """Evenly spaced lattice including both box edges."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        if not (len(lower) == len(upper) == len(shape)):
            raise ValueError("lower, upper and shape must have equal length")
        if np.any(upper <= lower):
            raise ValueError("upper bounds must exceed lower bounds")
        axes = [np.linspace(lo, hi, s) if s > 1 else np.array([(lo + hi) / 2])
                for lo, hi, s in zip(lower, upper, shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        return cls(points, shape)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def multi_index(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def neighbors(self, index: int) -> list[int]:
        """Flat indices at Chebyshev distance exactly 1 (diagonals included)."""
        center = self.multi_index(index)
        out = []
        for offs in itertools.product((-1, 0, 1), repeat=len(self.shape)):
            if all(o == 0 for o in offs):
                continue
            cell = tuple(c + o for c, o in zip(center, offs))
            if all(0 <= c < s for c, s in zip(cell, self.shape)):
                out.append(int(np.ravel_multi_index(cell, self.shape)))
        return out

    def nearest_index(self, point) -> int:
        p = as_points(point, dim=self.dim)[0]
        return int(np.argmin(np.sum((self.points - p) ** 2, axis=1)))

    def __len__(self) -> int:
        return self.n_points


@dataclass(frozen=True)
class Incumbent:
    """Current best estimate of the minimizer: the posterior-mean argmin."""

    index: int
    point: np.ndarray
    value: float


@dataclass(frozen=True, eq=False)
class MinimizerDistribution:
    """Normalized probability vector over a grid's points."""

    probabilities: np.ndarray
    grid: Grid

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (self.grid.n_points,):
            raise ValueError(
                f"probability vector shape {p.shape} does not match grid "
                f"size {self.grid.n_points}")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
        object.__setattr__(self, "probabilities", p)
        p.setflags(write=False)

    def mode(self) -> int:
        return int(np.argmax(self.probabilities))


def incumbent(post: GPPosterior, grid: Grid) -> Incumbent:
    """Argmin of the posterior mean over the grid (smallest index on ties)."""
    mean, _ = post.predict(grid.points)
    i = int(np.argmin(mean))
    return Incumbent(index=i, point=grid.points[i], value=float(mean[i]))


def _check_variances(var, signal_variance):
    if np.any(var < -1e-8 * signal_variance):
        worst = float(np.min(var))
        raise NumericalError(
            f"posterior variance {worst:g} below tolerance "
            f"-1e-8*{signal_variance:g}")
    return np.maximum(var, 0.0)


def proxy_scores_from_moments(mean, var, inc_index, cov_col=None) -> np.ndarray:
    """Unnormalized minimizer-probability proxy from posterior moments.

    Score at x is Phi((mu_inc - mu(x)) / sqrt(var_inc + var(x) - 2 cov))
    with the covariance term dropped when ``cov_col`` is None, or pointwise
    wherever it makes the variance of the difference degenerate. Fully
    degenerate points fall back to the limit convention: 1 below the
    incumbent mean, 0.5 at it, 0 above.

    Supports column-stacked inputs: mean of shape (n,) or (n, m) with var
    of shape (n,) shared across columns and inc_index scalar or (m,).
    """
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    stacked = mean.ndim == 2
    if not stacked:
        mean = mean[:, None]
    inc_index = np.atleast_1d(np.asarray(inc_index, dtype=int))
    cols = np.arange(mean.shape[1])
    mu_inc = mean[inc_index, cols]
    var_inc = var[inc_index]
    diff = mu_inc[None, :] - mean
    d2_ind = var_inc[None, :] + var[:, None]
    if cov_col is None:
        d2 = d2_ind.copy()
    else:
        cov_col = np.asarray(cov_col, dtype=float)
        if cov_col.ndim == 1:
            cov_col = cov_col[:, None]
        d2 = d2_ind - 2.0 * cov_col
        # the with-covariance denominator vanishes near the incumbent;
        # drop the covariance pointwise where it degenerates
        d2 = np.where(d2 < DEGENERATE_VAR, d2_ind, d2)
    degenerate = d2 < DEGENERATE_VAR
    safe_d2 = np.where(degenerate, 1.0, d2)
    scores = ndtr(diff / np.sqrt(safe_d2))
    limit = np.where(diff > 0, 1.0, np.where(diff == 0, 0.5, 0.0))
    scores = np.where(degenerate, limit, scores)
    return scores if stacked else scores[:, 0]


def proxy_scores(post: GPPosterior, grid: Grid, inc: Incumbent,
                 cov_mode: str = "independent") -> np.ndarray:
    """Unnormalized proxy scores over all grid points (the pointwise bound)."""
    if cov_mode not in ("independent", "with_covariance"):
        raise ValueError(f"unknown cov_mode {cov_mode!r}")
    mean, var = post.predict(grid.points)
    var = _check_variances(var, post.params.signal_variance)
    cov_col = None
    if cov_mode == "with_covariance":
        cov_col = post.cov_column(grid.points, grid.points[inc.index])
    return proxy_scores_from_moments(mean, var, inc.index, cov_col)


def proxy_distribution(post: GPPosterior, grid: Grid, inc: Incumbent,
                       cov_mode: str = "independent") -> MinimizerDistribution:
    """Normalized proxy approximation of the minimizer's posterior."""
    s = proxy_scores(post, grid, inc, cov_mode)
    return MinimizerDistribution(s / s.sum(), grid)


def entropy(dist: MinimizerDistribution) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    return entropy_of(dist.probabilities)


def entropy_of(probabilities) -> float:
    p = np.asarray(probabilities, dtype=float)
    return float(-np.sum(xlogy(p, p)))


def kl_divergence(p_true: MinimizerDistribution,
                  q: MinimizerDistribution) -> float:
    """KL(p_true || q) in nats; +inf when q vanishes on p_true's support."""
    if p_true.grid is not q.grid and not np.array_equal(
            p_true.grid.points, q.grid.points):
        raise ValueError("distributions live on different grids")
    return float(np.sum(rel_entr(p_true.probabilities, q.probabilities)))


def sampled_minimizer_distribution(post: GPPosterior, grid: Grid, count: int,
                                   rng: np.random.Generator
                                   ) -> MinimizerDistribution:
    """Histogram of argmin locations over joint posterior samples.

    The Monte-Carlo ground truth the cheap proxy is validated against;
    within-sample ties resolve to the smallest grid index.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    samples = post.sample(grid.points, count, rng)
    winners = np.argmin(samples, axis=1)
    hist = np.bincount(winners, minlength=grid.n_points).astype(float)
    return MinimizerDistribution(hist / count, grid)
