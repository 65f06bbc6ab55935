"""Command-line interface: benchmark runs, the ground-truth oracle, self-checks.

``run`` executes a seeded batch and writes JSONL/CSV/manifest outputs,
``oracle-check`` prints the brute-force minimizer facts for an objective,
and ``selfcheck`` runs the numerical property suites. A JSON config file
can supply any ``run`` option; explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .acquisition import CRITERIA, MINIMIZING_CRITERIA, AcquisitionConfig
from .checks import run_all
from .experiment import ExperimentConfig, run_batch, write_outputs
from .minimizer import Grid
from .testbed import get_objective, ground_truth

DEFAULT_GRIDS = {"toy1d": (121,), "hosaki": (15, 15), "camel6": (15, 15)}


def parse_grid(text: str) -> tuple[int, ...]:
    """Per-dimension grid counts from NxM syntax, e.g. '15x15' or '121'."""
    try:
        shape = tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"grid must look like '121' or '15x15', got {text!r}") from None
    if any(s <= 0 for s in shape):
        raise argparse.ArgumentTypeError(f"grid counts must be positive: {text!r}")
    return shape


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, the optional JSON config file, and explicit flags.

    Precedence: explicit CLI flag > config-file value > default. The
    Monte-Carlo criteria default to 2 initial samples; the baselines need
    a decent initial surrogate and default to 10.
    """
    from_file: dict = {}
    if args.config is not None:
        try:
            with open(args.config) as f:
                from_file = json.load(f)
        except (OSError, json.JSONDecodeError) as err:
            raise SystemExit(f"could not read config {args.config}: {err}")

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return from_file.get(key, default)

    objective = pick(args.objective, "objective", None)
    if objective is None:
        raise SystemExit("an objective is required (flag or config file)")
    criterion = pick(args.criterion, "criterion", "mme")
    acq = AcquisitionConfig(
        criterion=criterion,
        mc_samples=int(pick(args.mc_samples, "mc_samples", 30)),
        epsilon=float(pick(args.epsilon, "epsilon", 0.0)),
        cov_mode=pick(args.cov_mode, "cov_mode", "independent"),
    )
    n_init_default = 2 if acq.criterion in MINIMIZING_CRITERIA else 10
    grid_shape = pick(args.grid, "grid_shape", DEFAULT_GRIDS.get(objective))
    if grid_shape is None:
        raise SystemExit(f"no default grid for objective {objective!r}; "
                         f"pass --grid")
    return ExperimentConfig(
        objective=objective,
        grid_shape=tuple(grid_shape),
        noise_std=float(pick(args.noise_std, "noise_std", 0.1)),
        acquisition=acq,
        n_init=int(pick(args.n_init, "n_init", n_init_default)),
        n_iter=int(pick(args.n_iter, "n_iter", 50)),
        refit_every=int(pick(args.refit_every, "refit_every", 1)),
        n_restarts=int(pick(args.n_restarts, "n_restarts", 5)),
        repetitions=int(pick(args.reps, "repetitions", 1)),
        base_seed=int(pick(args.seed, "base_seed", 1)),
    )


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    summary = run_batch(cfg, n_jobs=args.jobs)
    last = len(summary.iterations) - 1
    print(f"objective={cfg.objective} criterion={cfg.acquisition.criterion} "
          f"reps={cfg.repetitions} completed={summary.n_completed}")
    print(f"final median entropy   {summary.median_entropy[last]:.6g}")
    print(f"final median KL        {summary.median_kl[last]:.6g}")
    print(f"final median est. min  {summary.median_fmin[last]:.6g} "
          f"(grid minimum {summary.grid_minimum:.6g})")
    print(f"runs recovering every true grid minimizer: "
          f"{summary.n_both_recovered}/{summary.n_completed}")
    for failure in summary.failures:
        print(f"run {failure.run_index} (seed {failure.seed}) failed at "
              f"iteration {failure.iteration}: {failure.message}",
              file=sys.stderr)
    if args.out is not None:
        paths = write_outputs(cfg, summary, args.out)
        print(f"wrote {len(paths)} files to {args.out}")
    return 0 if summary.n_completed == cfg.repetitions else 1


def cmd_oracle_check(args: argparse.Namespace) -> int:
    obj = get_objective(args.objective)
    shape = args.grid if args.grid is not None else DEFAULT_GRIDS[obj.name]
    grid = Grid.regular(obj.lower, obj.upper, shape)
    truth = ground_truth(obj, grid)

    def fmt(p):
        return "(" + ", ".join(f"{v:.6f}" for v in np.atleast_1d(p)) + ")"

    print(f"objective {obj.name} on box [{obj.lower}, {obj.upper}]")
    print(f"global minimum {truth.global_minimum:.9f} at:")
    for p in truth.global_minimizers:
        print(f"  {fmt(p)}")
    if len(truth.local_minimizers):
        print("non-global local minimizers:")
        for p in truth.local_minimizers:
            print(f"  {fmt(p)}  value {float(obj.fn(p[None, :])[0]):.9f}")
    shape_txt = "x".join(str(s) for s in grid.shape)
    print(f"grid ({shape_txt}) minimum {truth.grid_minimum:.9f} at:")
    for i in truth.grid_minimizers:
        print(f"  index {i} -> {fmt(grid.points[i])}")
    return 0


def cmd_selfcheck(args: argparse.Namespace) -> int:
    results = run_all(seed=args.seed)
    for r in results:
        print(r)
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmeopt",
        description="Bayesian optimization benchmarks minimizing the "
                    "entropy of the minimizer distribution")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a benchmark batch")
    run_p.add_argument("--objective", choices=("toy1d", "hosaki", "camel6"))
    run_p.add_argument("--criterion", choices=CRITERIA + ("kushner_pi",))
    run_p.add_argument("--grid", type=parse_grid,
                       help="per-dimension counts, e.g. 15x15 or 121")
    run_p.add_argument("--noise-std", type=float)
    run_p.add_argument("--n-init", type=int)
    run_p.add_argument("--n-iter", type=int)
    run_p.add_argument("--reps", type=int)
    run_p.add_argument("--mc-samples", type=int)
    run_p.add_argument("--epsilon", type=float)
    run_p.add_argument("--cov-mode", choices=("independent", "with_covariance"))
    run_p.add_argument("--refit-every", type=int)
    run_p.add_argument("--n-restarts", type=int)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out", help="output directory for JSONL/CSV/manifest")
    run_p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="parallel processes for repetitions")
    run_p.set_defaults(func=cmd_run)

    oracle_p = sub.add_parser("oracle-check",
                              help="print brute-force ground truth")
    oracle_p.add_argument("--objective", required=True,
                          choices=("toy1d", "hosaki", "camel6"))
    oracle_p.add_argument("--grid", type=parse_grid)
    oracle_p.set_defaults(func=cmd_oracle_check)

    self_p = sub.add_parser("selfcheck", help="run the numerical test suites")
    self_p.add_argument("--seed", type=int, default=0)
    self_p.set_defaults(func=cmd_selfcheck)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
