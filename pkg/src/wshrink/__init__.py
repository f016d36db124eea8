"""Wasserstein-robust precision matrix estimation.

The estimator minimizes the worst-case Gaussian log-loss over all normal
reference distributions within a type-2 Wasserstein ball around the empirical
distribution.  Without structural constraints it reduces to a nonlinear
eigenvalue shrinkage with a scalar dual root solve; with conditional
independence (zero-pattern) constraints it is solved by a projected Newton
method; the attaining worst-case distribution is available in closed form.
"""

from ._kernels import USING_NUMBA
from .analytical import (
    BisectionBracket,
    ShrinkageSolution,
    eigenvalue_map,
    gamma_bracket,
    reformulation_objective,
    solve_gamma,
    wasserstein_shrinkage,
)
from .applications import (
    BacktestConfig,
    BacktestResult,
    BenchmarkResult,
    LabeledDataset,
    LdaModel,
    SyntheticSpec,
    analytical_estimator,
    known_zero_pattern,
    lda_classify,
    lda_fit,
    min_variance_weights,
    pooled_moments,
    rolling_backtest,
    sample_gaussian,
    sparse_estimator,
    synthetic_benchmark,
    synthetic_sigma0,
    zero_pattern_of,
)
from .errors import EstimationError, LinearSolveError, LineSearchError, SingularMatrixError
from .evaluation import (
    CLASSIFICATION_ALPHA_GRID,
    CLASSIFICATION_RHO_GRID,
    PORTFOLIO_ALPHA_GRID,
    PORTFOLIO_RHO_GRID,
    CVReport,
    SampleMoments,
    TuningGrid,
    cross_validate,
    gaussian_validation_nll,
    kfold_stein,
    linear_shrinkage,
    make_folds,
    sample_moments,
    stein_loss,
)
from .gaussian import (
    GaussianModel,
    SpectralDecomposition,
    as_symmetric,
    induced_metric_V,
    kl_divergence,
    spectral_decompose,
    sqrtm_psd,
    wasserstein_gaussian,
)
from .sqa import (
    NewtonStep,
    SolverConfig,
    SolverTrace,
    SparsityPattern,
    armijo_step,
    descent_direction,
    project_pattern,
    sqa_gradient,
    sqa_hessian_apply,
    sqa_solve,
)
from .worst_case import (
    WorstCaseDistribution,
    extremal_covariance,
    extremal_for_optimal,
    extremal_gamma,
    sample_within_radius,
)

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA",
    "BisectionBracket",
    "ShrinkageSolution",
    "eigenvalue_map",
    "gamma_bracket",
    "reformulation_objective",
    "solve_gamma",
    "wasserstein_shrinkage",
    "BacktestConfig",
    "BacktestResult",
    "BenchmarkResult",
    "LabeledDataset",
    "LdaModel",
    "SyntheticSpec",
    "analytical_estimator",
    "known_zero_pattern",
    "lda_classify",
    "lda_fit",
    "min_variance_weights",
    "pooled_moments",
    "rolling_backtest",
    "sample_gaussian",
    "sparse_estimator",
    "synthetic_benchmark",
    "synthetic_sigma0",
    "zero_pattern_of",
    "EstimationError",
    "LinearSolveError",
    "LineSearchError",
    "SingularMatrixError",
    "CLASSIFICATION_ALPHA_GRID",
    "CLASSIFICATION_RHO_GRID",
    "PORTFOLIO_ALPHA_GRID",
    "PORTFOLIO_RHO_GRID",
    "CVReport",
    "SampleMoments",
    "TuningGrid",
    "cross_validate",
    "gaussian_validation_nll",
    "kfold_stein",
    "linear_shrinkage",
    "make_folds",
    "sample_moments",
    "stein_loss",
    "GaussianModel",
    "SpectralDecomposition",
    "as_symmetric",
    "induced_metric_V",
    "kl_divergence",
    "spectral_decompose",
    "sqrtm_psd",
    "wasserstein_gaussian",
    "NewtonStep",
    "SolverConfig",
    "SolverTrace",
    "SparsityPattern",
    "armijo_step",
    "descent_direction",
    "project_pattern",
    "sqa_gradient",
    "sqa_hessian_apply",
    "sqa_solve",
    "WorstCaseDistribution",
    "extremal_covariance",
    "extremal_for_optimal",
    "extremal_gamma",
    "sample_within_radius",
]
