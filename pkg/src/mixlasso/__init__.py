"""l1-penalized maximum likelihood for mixtures of Gaussian regressions.

Library layout:

* :mod:`mixlasso.model` - parameters, density, score, penalty, box.
* :mod:`mixlasso.divergence` - KL divergences (closed form and Monte Carlo).
* :mod:`mixlasso.estimator` - penalized EM solver and penalty paths.
* :mod:`mixlasso.bounds` - explicit constants and the oracle risk bound.
* :mod:`mixlasso.simulator` - ground truths, designs, response sampling.
* :mod:`mixlasso.harness` - reproducible experiments and artifact output.
"""

from .bounds import (
    BoundReport,
    DEFAULT_KAPPA,
    DEFAULT_KAPPA_PRIME,
    c_mn,
    delta_m,
    lambda_threshold,
    m_n,
    oracle_rhs,
    packing_bound,
    r_n,
    tail_bound,
    tail_probability_bound,
    x_max_n,
)
from .divergence import KlEstimate, kl_conditional_mc, kl_gaussian, kl_n
from .errors import (
    ConfigurationError,
    DegenerateComponentError,
    DomainError,
    ReplicateError,
    ShapeError,
)
from .estimator import (
    FitConfig,
    FitResult,
    PathResult,
    e_step,
    fit_lasso,
    fit_null_model,
    lambda_path,
    m_step,
    penalized_nll,
    run_em,
    zero_coefficient_gradient_sup,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    LambdaAggregate,
    LambdaPolicy,
    ReplicateRow,
    emit_report,
    read_report_csv,
    run_oracle_experiment,
)
from .model import (
    BoxViolation,
    Dataset,
    LogDensityGradient,
    ModelParams,
    ParameterBox,
    check_box_membership,
    gradient_bound_constant,
    l1_norm,
    log_density_gradient,
    mixture_log_density,
    project_to_box,
)
from .simulator import (
    SimSpec,
    make_ground_truth,
    sample_design,
    sample_responses,
    simulate_dataset,
    truncation_event,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "BoxViolation", "ConfigurationError", "Dataset",
    "DEFAULT_KAPPA", "DEFAULT_KAPPA_PRIME", "DegenerateComponentError",
    "DomainError", "ExperimentConfig", "ExperimentReport", "FitConfig",
    "FitResult", "KlEstimate", "LambdaAggregate", "LambdaPolicy",
    "LogDensityGradient", "ModelParams", "ParameterBox", "PathResult",
    "ReplicateError", "ReplicateRow", "ShapeError", "SimSpec",
    "c_mn", "check_box_membership", "delta_m", "e_step", "emit_report",
    "fit_lasso", "fit_null_model", "gradient_bound_constant", "kl_conditional_mc",
    "kl_gaussian", "kl_n", "l1_norm", "lambda_path", "lambda_threshold",
    "log_density_gradient", "m_n", "m_step", "make_ground_truth",
    "mixture_log_density", "oracle_rhs", "packing_bound", "penalized_nll",
    "project_to_box", "r_n", "read_report_csv", "run_em",
    "run_oracle_experiment", "sample_design", "sample_responses",
    "simulate_dataset", "tail_bound", "tail_probability_bound",
    "truncation_event", "x_max_n", "zero_coefficient_gradient_sup",
]
