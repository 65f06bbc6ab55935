"""Bayesian global optimization by minimizing minimizer-distribution entropy.

A Gaussian-process surrogate with exact inference and evidence-optimized
hyperparameters; a grid-based posterior distribution over the function's
minimizer; acquisition criteria that either shrink that distribution's
expected entropy or follow classical improvement heuristics; and a seeded
benchmark harness with noisy synthetic objectives.
"""

from .acquisition import (CRITERIA, AcquisitionConfig, fast_mme_score,
                          mei_score, mei_scores, mme_score, pi_score,
                          pi_scores, select_next, variance_score,
                          variance_scores)
from .checks import CheckResult, run_all
from .errors import NumericalError, RunFailure
from .estimator import GPRegressor
from .experiment import (BatchSummary, ExperimentConfig, IterationRecord,
                         RunResult, make_rng, read_records, run_batch,
                         run_single, write_outputs)
from .gp import (GPParams, GPPosterior, ParamBounds, default_params,
                 fit_params, log_evidence, sqexp_kernel)
from .minimizer import (Grid, Incumbent, MinimizerDistribution, entropy,
                        entropy_of, incumbent, kl_divergence,
                        proxy_distribution, proxy_scores,
                        sampled_minimizer_distribution)
from .testbed import (OBJECTIVES, GroundTruth, NoisyOracle, Objective,
                      evaluate_objective, get_objective, ground_truth,
                      noisy_query)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig", "BatchSummary", "CheckResult", "CRITERIA",
    "ExperimentConfig", "GPParams", "GPPosterior", "GPRegressor", "Grid",
    "GroundTruth", "Incumbent", "IterationRecord", "MinimizerDistribution",
    "NoisyOracle", "NumericalError", "OBJECTIVES", "Objective", "ParamBounds",
    "RunFailure", "RunResult", "default_params", "entropy", "entropy_of",
    "evaluate_objective", "fast_mme_score", "fit_params", "get_objective",
    "ground_truth", "incumbent", "kl_divergence", "log_evidence", "make_rng",
    "mei_score", "mei_scores", "mme_score", "noisy_query", "pi_score",
    "pi_scores", "proxy_distribution", "proxy_scores", "read_records",
    "run_all", "run_batch", "run_single", "sampled_minimizer_distribution",
    "select_next", "sqexp_kernel", "variance_score", "variance_scores",
    "write_outputs",
]
