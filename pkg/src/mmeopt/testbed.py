"""Benchmark objectives, the noisy observation oracle, and ground truth.

Ground truth (continuous and grid-restricted minimizers) is established by
brute force over a fine lattice followed by bounded local refinement, so
benchmark gates never depend on hand-entered constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .gp import as_points
from .minimizer import Grid, MinimizerDistribution

REFINEMENT_LATTICE_MIN = 100_000


def _value_tol(fmin: float) -> float:
    """Slack for calling values tied with a minimum."""
    return 1e-9 + 1e-6 * abs(fmin)


@dataclass(frozen=True)
class Objective:
    """A deterministic benchmark function on a closed box domain.

    ``fn`` is vectorized: it maps an (..., dim) array to (...) values.
    """

    name: str
    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    fn: Callable[[np.ndarray], np.ndarray]

    @property
    def domain_lengths(self) -> np.ndarray:
        return np.asarray(self.upper, float) - np.asarray(self.lower, float)


def _toy1d(p: np.ndarray) -> np.ndarray:
    x = p[..., 0]
    return (1.0 - np.exp(-(x**2))) * np.cos(3.0 * np.pi * x)


def _hosaki(p: np.ndarray) -> np.ndarray:
    x1, x2 = p[..., 0], p[..., 1]
    poly = 1.0 - 8.0 * x1 + 7.0 * x1**2 - (7.0 / 3.0) * x1**3 + 0.25 * x1**4
    return poly * x2**2 * np.exp(-x2)


def _camel6(p: np.ndarray) -> np.ndarray:
    x1, x2 = p[..., 0], p[..., 1]
    return ((4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2
            + x1 * x2 + (-4.0 + 4.0 * x2**2) * x2**2)


OBJECTIVES = {
    "toy1d": Objective("toy1d", 1, (-1.5,), (1.5,), _toy1d),
    "hosaki": Objective("hosaki", 2, (0.0, 0.0), (5.0, 6.0), _hosaki),
    "camel6": Objective("camel6", 2, (-2.0, -1.0), (2.0, 1.0), _camel6),
}


def get_objective(name: str) -> Objective:
    try:
        return OBJECTIVES[name]
    except KeyError:
        raise ValueError(
            f"unknown objective {name!r}; expected one of "
            f"{sorted(OBJECTIVES)}") from None


def _require_in_domain(obj: Objective, pts: np.ndarray):
    lo = np.asarray(obj.lower) - 1e-12
    hi = np.asarray(obj.upper) + 1e-12
    if np.any(pts < lo) or np.any(pts > hi):
        raise ValueError(
            f"point outside the {obj.name} domain "
            f"[{obj.lower}, {obj.upper}]: {pts[np.any((pts < lo) | (pts > hi), axis=-1)]}")


def evaluate_objective(obj: Objective, x) -> float:
    """Objective value at a single in-domain point."""
    p = as_points(x, dim=obj.dim)
    _require_in_domain(obj, p)
    return float(obj.fn(p)[0])


@dataclass(frozen=True)
class NoisyOracle:
    """Observation channel adding i.i.d. Gaussian noise to objective values."""

    objective: Objective
    noise_std: float

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")

    def query(self, x, rng: np.random.Generator) -> float:
        return noisy_query(self, x, rng)


def noisy_query(oracle: NoisyOracle, x, rng: np.random.Generator) -> float:
    """One noisy observation; a fresh noise draw on every call."""
    value = evaluate_objective(oracle.objective, x)
    return value + oracle.noise_std * float(rng.standard_normal())


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Continuous and grid-restricted minimizer facts for one objective."""

    global_minimizers: np.ndarray  # (k, dim)
    global_minimum: float
    grid_minimizers: tuple[int, ...]
    grid_minimum: float
    reference_distribution: MinimizerDistribution
    local_minimizers: np.ndarray  # non-global interior minima, informational


def _lattice_axes(obj: Objective) -> list[np.ndarray]:
    per_dim = int(np.ceil(REFINEMENT_LATTICE_MIN ** (1.0 / obj.dim))) + 1
    return [np.linspace(lo, hi, per_dim)
            for lo, hi in zip(obj.lower, obj.upper)]


def _lattice_local_minima(values: np.ndarray) -> np.ndarray:
    """Boolean mask of lattice cells not exceeded by any axis neighbor."""
    mask = np.ones_like(values, dtype=bool)
    for axis in range(values.ndim):
        pad = [(0, 0)] * values.ndim
        pad[axis] = (1, 1)
        padded = np.pad(values, pad, constant_values=np.inf)
        lo = tuple(slice(0, -2) if a == axis else slice(None)
                   for a in range(values.ndim))
        hi = tuple(slice(2, None) if a == axis else slice(None)
                   for a in range(values.ndim))
        mask &= (values <= padded[lo]) & (values <= padded[hi])
    return mask


def _dedupe(points: np.ndarray, values: np.ndarray, tol: float):
    order = np.argsort(values, kind="stable")
    kept_p, kept_v = [], []
    for i in order:
        if all(np.linalg.norm(points[i] - q) > tol for q in kept_p):
            kept_p.append(points[i])
            kept_v.append(values[i])
    return np.asarray(kept_p), np.asarray(kept_v)


def ground_truth(obj: Objective, grid: Grid) -> GroundTruth:
    """Brute-force minimizer oracle for an objective and candidate grid.

    Scans a >= 1e5-point lattice, refines every lattice local minimum with
    bounded L-BFGS-B, and keeps the refined points tied (within a relative
    value tolerance) with the best as global minimizers. Grid minimizers
    are the grid indices tied with the grid minimum under the same
    tolerance; the reference distribution is uniform over them.
    Deterministic; uses no random numbers.
    """
    if grid.dim != obj.dim:
        raise ValueError(
            f"grid dimension {grid.dim} does not match objective "
            f"dimension {obj.dim}")
    axes = _lattice_axes(obj)
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = np.stack(mesh, axis=-1)
    values = obj.fn(lattice)
    starts = lattice[_lattice_local_minima(values)]

    box = list(zip(obj.lower, obj.upper))
    refined_p, refined_v = [], []
    for x0 in starts:
        res = minimize(lambda z: float(obj.fn(np.asarray(z)[None, :])[0]),
                       x0, method="L-BFGS-B", bounds=box)
        refined_p.append(np.clip(res.x, obj.lower, obj.upper))
        refined_v.append(float(res.fun))
    refined_p = np.asarray(refined_p)
    refined_v = np.asarray(refined_v)
    diag = float(np.linalg.norm(obj.domain_lengths))
    refined_p, refined_v = _dedupe(refined_p, refined_v, 1e-4 * diag)

    fmin = float(refined_v.min())
    is_global = refined_v <= fmin + _value_tol(fmin)
    global_minimizers = refined_p[is_global]
    local_minimizers = refined_p[~is_global]

    grid_values = obj.fn(grid.points)
    gmin = float(grid_values.min())
    grid_idx = tuple(int(i) for i in
                     np.flatnonzero(grid_values <= gmin + _value_tol(gmin)))
    probs = np.zeros(grid.n_points)
    probs[list(grid_idx)] = 1.0 / len(grid_idx)
    return GroundTruth(
        global_minimizers=global_minimizers,
        global_minimum=fmin,
        grid_minimizers=grid_idx,
        grid_minimum=gmin,
        reference_distribution=MinimizerDistribution(probs, grid),
        local_minimizers=local_minimizers,
    )
