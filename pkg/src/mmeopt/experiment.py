"""Sequential optimization runs, batch aggregation, and file outputs.

A run starts from uniform-random grid samples and then alternates refitting
hyperparameters, scoring every grid candidate under the configured
acquisition criterion, and querying the noisy oracle at the winner. Batches
repeat runs over consecutive seeds (optionally in parallel), aggregate
per-iteration medians, and score minimizer recovery against the brute-force
ground truth. All randomness is keyed off (seed, stream) pairs so parallel
and serial execution produce identical bytes.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .acquisition import (AcquisitionConfig, fast_mme_score, mei_scores,
                          mme_score, pi_scores, select_next, variance_scores)
from .errors import NumericalError, RunFailure
from .gp import GPParams, GPPosterior, ParamBounds, default_params, fit_params
from .minimizer import (Grid, entropy, incumbent, kl_divergence,
                        proxy_distribution)
from .testbed import GroundTruth, NoisyOracle, get_objective, ground_truth


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for stream ``key`` of run ``seed``.

    Streams in use: (0,) initial design, (1,) oracle noise, (2, iter)
    hyperparameter refits, (3, iter, candidate) per-candidate scoring.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one benchmark batch."""

    objective: str
    grid_shape: tuple[int, ...]
    noise_std: float
    acquisition: AcquisitionConfig = AcquisitionConfig()
    n_init: int = 2
    n_iter: int = 50
    refit_every: int = 1
    n_restarts: int = 5
    repetitions: int = 1
    base_seed: int = 1

    def __post_init__(self):
        get_objective(self.objective)
        shape = tuple(int(s) for s in self.grid_shape)
        object.__setattr__(self, "grid_shape", shape)
        if any(s <= 0 for s in shape):
            raise ValueError(f"grid shape must be positive, got {shape}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.n_init < 0:
            raise ValueError(f"n_init must be >= 0, got {self.n_init}")
        if int(np.prod(shape)) < self.n_init:
            raise ValueError(
                f"n_init {self.n_init} exceeds grid size {int(np.prod(shape))}")
        if self.n_iter < 1:
            raise ValueError(f"n_iter must be >= 1, got {self.n_iter}")
        if self.refit_every < 1:
            raise ValueError(
                f"refit_every must be >= 1, got {self.refit_every}")
        if self.n_restarts < 1:
            raise ValueError(f"n_restarts must be >= 1, got {self.n_restarts}")
        if self.repetitions < 1:
            raise ValueError(
                f"repetitions must be >= 1, got {self.repetitions}")

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "grid_shape": list(self.grid_shape),
            "noise_std": self.noise_std,
            "criterion": self.acquisition.criterion,
            "mc_samples": self.acquisition.mc_samples,
            "epsilon": self.acquisition.epsilon,
            "cov_mode": self.acquisition.cov_mode,
            "n_init": self.n_init,
            "n_iter": self.n_iter,
            "refit_every": self.refit_every,
            "n_restarts": self.n_restarts,
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        d = dict(d)
        acq = AcquisitionConfig(
            criterion=d.pop("criterion", "mme"),
            mc_samples=d.pop("mc_samples", 30),
            epsilon=d.pop("epsilon", 0.0),
            cov_mode=d.pop("cov_mode", "independent"),
        )
        d["grid_shape"] = tuple(d["grid_shape"])
        return ExperimentConfig(acquisition=acq, **d)

    def make_grid(self) -> Grid:
        obj = get_objective(self.objective)
        if len(self.grid_shape) != obj.dim:
            raise ValueError(
                f"grid shape {self.grid_shape} has rank {len(self.grid_shape)} "
                f"but {self.objective} is {obj.dim}-dimensional")
        return Grid.regular(obj.lower, obj.upper, self.grid_shape)


@dataclass(frozen=True)
class IterationRecord:
    """Everything logged after one acquisition.

    ``incumbent_value`` is the estimated minimum (posterior mean at the
    incumbent); entropy and KL are those of the proxy minimizer
    distribution after incorporating the new observation. ``elapsed_ms``
    is excluded from both equality and serialization so record streams
    stay byte-reproducible.
    """

    iteration: int
    point: tuple[float, ...]
    y: float
    incumbent_point: tuple[float, ...]
    incumbent_value: float
    entropy: float
    kl: float
    params: GPParams
    elapsed_ms: float = field(default=0.0, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "point": list(self.point),
            "y": self.y,
            "incumbent_point": list(self.incumbent_point),
            "incumbent_value": self.incumbent_value,
            "entropy": self.entropy,
            "kl": self.kl,
            "params": {
                "lengthscale": self.params.lengthscale,
                "signal_variance": self.params.signal_variance,
                "noise_variance": self.params.noise_variance,
                "mean_const": self.params.mean_const,
            },
        }

    @staticmethod
    def from_json_dict(d: dict) -> "IterationRecord":
        return IterationRecord(
            iteration=int(d["iteration"]),
            point=tuple(float(v) for v in d["point"]),
            y=float(d["y"]),
            incumbent_point=tuple(float(v) for v in d["incumbent_point"]),
            incumbent_value=float(d["incumbent_value"]),
            entropy=float(d["entropy"]),
            kl=float(d["kl"]),
            params=GPParams(**d["params"]),
        )


@dataclass(frozen=True, eq=False)
class RunResult:
    """One completed run: its records plus the final posterior snapshot."""

    seed: int
    records: tuple[IterationRecord, ...]
    final_probabilities: np.ndarray
    final_means: np.ndarray
    final_params: GPParams


@dataclass(frozen=True)
class RunFailureInfo:
    """Where and why a run died, with the records completed before that."""

    run_index: int
    seed: int
    iteration: int
    message: str
    records: tuple[IterationRecord, ...]


@dataclass(frozen=True)
class RecoveryReport:
    """Recovery verdict for one true grid minimizer in one run.

    A minimizer counts as recovered when the final proxy distribution has
    a local maximum (no neighbor with higher mass) within one grid cell of
    it carrying at least twice the uniform mass. ``estimated_value`` is
    the final posterior mean at the recovering peak (NaN if none).
    """

    minimizer_index: int
    recovered: bool
    peak_index: int
    estimated_value: float


@dataclass(frozen=True, eq=False)
class BatchSummary:
    """Medians and recovery statistics across the completed runs of a batch."""

    iterations: tuple[int, ...]
    median_entropy: tuple[float, ...]
    median_kl: tuple[float, ...]
    median_fmin: tuple[float, ...]
    final_modes: tuple[int, ...]
    recovery: tuple[tuple[RecoveryReport, ...], ...]
    n_completed: int
    failures: tuple[RunFailureInfo, ...]
    grid_minimum: float
    grid_minimizers: tuple[int, ...]
    runs: tuple[RunResult, ...]

    @property
    def n_both_recovered(self) -> int:
        """Runs whose final proxy recovers every true grid minimizer."""
        return sum(all(r.recovered for r in reps) for reps in self.recovery)


def _fit_or_default(X, y, params, cfg: ExperimentConfig, seed: int,
                    iteration: int, diag: float) -> GPParams:
    if X.shape[0] < 2:
        return params
    bounds = ParamBounds.from_data(X, y, x_scale=diag)
    return fit_params(X, y, rng=make_rng(seed, 2, iteration),
                      n_restarts=cfg.n_restarts, bounds=bounds,
                      warm_start=params if X.shape[0] > 2 else None)


def _score_candidates(X, y, params: GPParams, post: GPPosterior, grid: Grid,
                      acq: AcquisitionConfig, seed: int,
                      iteration: int) -> np.ndarray:
    if acq.criterion == "mme":
        return np.array([
            mme_score(X, y, params, grid.points[i], grid, acq,
                      make_rng(seed, 3, iteration, i))
            for i in range(grid.n_points)])
    if acq.criterion == "fast_mme":
        return np.array([
            fast_mme_score(X, y, params, grid.points[i], grid, acq)
            for i in range(grid.n_points)])
    inc = incumbent(post, grid)
    if acq.criterion == "mei":
        return mei_scores(post, grid.points, inc.value, acq.epsilon)
    if acq.criterion == "pi":
        return pi_scores(post, grid.points, inc.value, acq.epsilon)
    return variance_scores(post, grid.points)


def run_single(cfg: ExperimentConfig, seed: int,
               truth: GroundTruth | None = None) -> RunResult:
    """One seeded optimization run; bit-reproducible given (cfg, seed).

    The ground-truth oracle (for the KL reference) is recomputed unless
    passed in. Numerical failures are re-raised as RunFailure carrying the
    iteration index and the records completed so far.
    """
    obj = get_objective(cfg.objective)
    grid = cfg.make_grid()
    if truth is None:
        truth = ground_truth(obj, grid)
    oracle = NoisyOracle(obj, cfg.noise_std)
    diag = float(np.linalg.norm(obj.domain_lengths))
    acq = cfg.acquisition

    init_rng = make_rng(seed, 0)
    noise_rng = make_rng(seed, 1)
    init_idx = init_rng.choice(grid.n_points, size=cfg.n_init, replace=False)
    X = grid.points[init_idx].copy()
    y = np.array([oracle.query(x, noise_rng) for x in X])

    params = default_params(obj.domain_lengths, y)
    records: list[IterationRecord] = []
    for k in range(1, cfg.n_iter + 1):
        t0 = time.perf_counter()
        try:
            if (k - 1) % cfg.refit_every == 0:
                params = _fit_or_default(X, y, params, cfg, seed, k, diag)
            post = GPPosterior(X, y, params)
            scores = _score_candidates(X, y, params, post, grid, acq, seed, k)
            chosen = select_next(scores, acq.direction)
            x_next = grid.points[chosen]
            y_next = oracle.query(x_next, noise_rng)
            X = np.vstack([X, x_next[None, :]])
            y = np.append(y, y_next)

            post = GPPosterior(X, y, params)
            inc = incumbent(post, grid)
            dist = proxy_distribution(post, grid, inc, acq.cov_mode)
        except (NumericalError, ValueError) as err:
            raise RunFailure(
                f"run with seed {seed} failed at iteration {k}: {err}",
                iteration=k, records=tuple(records)) from err
        records.append(IterationRecord(
            iteration=k,
            point=tuple(float(v) for v in x_next),
            y=float(y_next),
            incumbent_point=tuple(float(v) for v in inc.point),
            incumbent_value=float(inc.value),
            entropy=entropy(dist),
            kl=kl_divergence(truth.reference_distribution, dist),
            params=params,
            elapsed_ms=(time.perf_counter() - t0) * 1e3,
        ))

    means, _ = post.predict(grid.points)
    return RunResult(seed=seed, records=tuple(records),
                     final_probabilities=dist.probabilities,
                     final_means=means, final_params=params)


def _recovery_reports(result: RunResult, grid: Grid,
                      truth: GroundTruth) -> tuple[RecoveryReport, ...]:
    p = result.final_probabilities
    threshold = 2.0 / grid.n_points
    reports = []
    for t in truth.grid_minimizers:
        best_j, best_mass = -1, -np.inf
        for j in (t, *grid.neighbors(t)):
            if p[j] < threshold or p[j] < max(
                    (p[m] for m in grid.neighbors(j)), default=-np.inf):
                continue
            if p[j] > best_mass:
                best_j, best_mass = j, p[j]
        reports.append(RecoveryReport(
            minimizer_index=t,
            recovered=best_j >= 0,
            peak_index=best_j,
            estimated_value=float(result.final_means[best_j])
            if best_j >= 0 else float("nan")))
    return tuple(reports)


def _run_indexed(cfg: ExperimentConfig, run_index: int, truth: GroundTruth):
    seed = cfg.base_seed + run_index
    try:
        return run_index, run_single(cfg, seed, truth)
    except RunFailure as err:
        return run_index, RunFailureInfo(
            run_index=run_index, seed=seed, iteration=err.iteration,
            message=str(err), records=err.records)


def run_batch(cfg: ExperimentConfig, n_jobs: int = 1) -> BatchSummary:
    """R independent runs with seeds base_seed + 0 .. base_seed + R - 1.

    ``n_jobs`` fans runs out to processes; results are identical to serial
    execution because every run's randomness is fixed by its own seed.
    Medians are taken over completed runs only; raises if all runs fail.
    """
    obj = get_objective(cfg.objective)
    grid = cfg.make_grid()
    truth = ground_truth(obj, grid)
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_run_indexed)(cfg, i, truth) for i in range(cfg.repetitions))
    outcomes = [res for _, res in sorted(outcomes, key=lambda t: t[0])]

    runs = tuple(r for r in outcomes if isinstance(r, RunResult))
    failures = tuple(r for r in outcomes if isinstance(r, RunFailureInfo))
    if not runs:
        raise NumericalError(
            f"all {cfg.repetitions} runs failed; first failure: "
            f"{failures[0].message}")

    ent = np.array([[rec.entropy for rec in r.records] for r in runs])
    kl = np.array([[rec.kl for rec in r.records] for r in runs])
    fmin = np.array([[rec.incumbent_value for rec in r.records] for r in runs])
    return BatchSummary(
        iterations=tuple(range(1, cfg.n_iter + 1)),
        median_entropy=tuple(float(v) for v in np.median(ent, axis=0)),
        median_kl=tuple(float(v) for v in np.median(kl, axis=0)),
        median_fmin=tuple(float(v) for v in np.median(fmin, axis=0)),
        final_modes=tuple(int(np.argmax(r.final_probabilities)) for r in runs),
        recovery=tuple(_recovery_reports(r, grid, truth) for r in runs),
        n_completed=len(runs),
        failures=failures,
        grid_minimum=truth.grid_minimum,
        grid_minimizers=truth.grid_minimizers,
        runs=runs,
    )


def _dump_json_line(d: dict) -> str:
    return json.dumps(d, ensure_ascii=False, separators=(", ", ": "))


def write_outputs(cfg: ExperimentConfig, summary: BatchSummary,
                  out_dir: str) -> list[str]:
    """Persist a batch: per-run JSONL, batch CSV, and a manifest JSON.

    Bytes are a pure function of (cfg, summary). Returns the paths written.
    Failed runs still get a JSONL with their completed records.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    by_index: dict[int, tuple[IterationRecord, ...]] = {}
    seeds: dict[int, int] = {}
    completed = iter(summary.runs)
    failed = {f.run_index: f for f in summary.failures}
    for i in range(cfg.repetitions):
        if i in failed:
            by_index[i] = failed[i].records
            seeds[i] = failed[i].seed
        else:
            r = next(completed)
            by_index[i] = r.records
            seeds[i] = r.seed

    for i in range(cfg.repetitions):
        path = os.path.join(out_dir, f"run_{i:03d}.jsonl")
        try:
            with open(path, "w") as f:
                for rec in by_index[i]:
                    f.write(_dump_json_line(rec.to_json_dict()) + "\n")
        except OSError as err:
            raise OSError(f"failed writing {path}: {err}") from err
        written.append(path)

    csv_path = os.path.join(out_dir, "batch.csv")
    with open(csv_path, "w") as f:
        f.write("iteration,median_entropy,median_kl,median_fmin\n")
        for it, e, k, fm in zip(summary.iterations, summary.median_entropy,
                                summary.median_kl, summary.median_fmin):
            f.write(f"{it},{e!r},{k!r},{fm!r}\n")
    written.append(csv_path)

    manifest = {
        "config": cfg.to_dict(),
        "seeds": [seeds[i] for i in range(cfg.repetitions)],
        "n_completed": summary.n_completed,
        "failures": [{"run_index": f.run_index, "seed": f.seed,
                      "iteration": f.iteration, "message": f.message}
                     for f in summary.failures],
        "grid_minimum": summary.grid_minimum,
        "grid_minimizers": list(summary.grid_minimizers),
        "final_modes": list(summary.final_modes),
        "recovery": [[{"minimizer_index": r.minimizer_index,
                       "recovered": r.recovered,
                       "peak_index": r.peak_index,
                       "estimated_value": r.estimated_value}
                      for r in reports] for reports in summary.recovery],
        "runs_recovering_all": summary.n_both_recovered,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    written.append(manifest_path)
    return written


def read_records(path: str) -> list[IterationRecord]:
    """Parse a run JSONL file back into records."""
    out = []
    with open(path) as f:
        for line in f:
            if line.strip():
                out.append(IterationRecord.from_json_dict(json.loads(line)))
    return out
