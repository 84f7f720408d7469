"""Derivative-free global optimization via weighted-sample proximal
iterations, with analysis oracles, test objectives, a DE/rand/1/bin
baseline and a reproducible experiment harness."""

from .core import (
    AppParams,
    IterateRecord,
    IterateState,
    ObjectiveSpec,
    RunTrace,
    WeightUnderflowError,
    app_step_original,
    app_step_stable,
    initial_iterate,
    run,
    weighted_mean,
)
from .sampling import (
    SampleBatch,
    SamplerStream,
    gaussian_batch,
    inverse_normal_cdf,
    radical_inverse,
    scramble_permutation,
)
from .objectives import (
    BoundCheckReport,
    check_assumption_bounds,
    fig1_left,
    fig1_right,
    get_objective,
    revised_rastrigin,
    sphere,
)
from .baselines import DEConfig, Population, de_run, de_step, default_pop_size
from .analysis import (
    ConvergenceEnvelope,
    GaussianIntegralParams,
    asymptotic_ratio_estimate,
    gaussian_integral_i1,
    gaussian_integral_i2,
    gaussian_integral_quadrature,
    mk_bounds,
    mk_monte_carlo,
    n_lower_bound,
    proximal_point_bruteforce,
    rho_lambda,
    sample_size_diagnostic,
    uk_diagnostic,
)
from .harness import (
    ComparisonTable,
    ConfigError,
    ExperimentConfig,
    RateFit,
    ValidationReport,
    compare,
    fit_rate,
    parse_config,
    parse_compare_config,
    read_trace,
    run_experiment,
    run_one,
    validate,
    write_trace,
)

__version__ = "0.1.0"
