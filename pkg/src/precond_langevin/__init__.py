"""Langevin Monte Carlo with learned preconditioners.

A sampling toolkit built around three pieces:

* samplers: thinned (burn-in + thinning) unadjusted Langevin chains,
  optionally preconditioned with a covariance or Fisher-matrix estimate
  learned from a first phase, plus an unadjusted underdamped kernel;
* planners that turn Wasserstein-2 contraction parameters into explicit
  burn-in/thinning/step-size/sample-size schedules with full provenance
  and exact FLOP forecasts;
* an exact verification oracle for Gaussian targets that computes the
  joint law of the thinned ensemble in closed form, so the planned
  approximate-IID guarantees can be checked literally.
"""

from .budget import (
    Budget,
    LearnSpec,
    PreconditionerKind,
    format_budget_text,
    plan_generalized,
    plan_learning,
    plan_thinned,
    plan_ula_preconditioned,
    plan_ula_unpreconditioned,
    plan_underdamped_unpreconditioned,
)
from .errors import (
    AdmissibilityError,
    BiasDominatesError,
    ConfigError,
    DegenerateEnsembleError,
    DimensionMismatchError,
    EpsilonOutOfRangeError,
    FactorizationError,
    InadmissibleToleranceError,
    NumericalFailureError,
    OracleTooLargeError,
    OracleUnsupportedError,
    ParameterError,
    RefuseToRunError,
    StepSizeTooLargeError,
    ToolkitError,
)
from .estimators import (
    Certificate,
    Ensemble,
    certify,
    empirical_covariance,
    empirical_fisher,
    relative_error,
)
from .flops import FlopLedger
from .kernels import (
    ContractionParams,
    KernelConfig,
    KernelFamily,
    contraction_params_hmc_preset,
    contraction_params_ula,
    contraction_params_underdamped,
    preconditioned_ula_step,
    ula_step,
    underdamped_step,
)
from .linalg import (
    AffineMap,
    GaussianLaw,
    SpdMatrix,
    bures_w2,
    load_spd_text,
    optimal_coupling_map,
    save_spd_text,
    spd_sqrt,
    spectral_bounds,
    w2_gaussian_to_point,
)
from .oracle import (
    ChainLaw,
    ConsequenceReport,
    aiid_consequence_checks,
    exact_joint_law,
    exact_marginal_law,
    sample_thinned_exact,
    thinned_decomposition_check,
)
from .policy import DEFAULT, NumericPolicy
from .rng import substream
from .sampler import (
    ForecastRecord,
    PreconditionedRun,
    SamplingMode,
    run_learn_phase,
    run_preconditioned,
    run_thinned,
    save_ensemble,
    total_flops_forecast,
)
from .targets import (
    PreconditionedConstants,
    Target,
    check_gradient,
    condition_number_transfer,
    estimated_preconditioner_bracket,
    gaussian_pushforward,
    make_gaussian_target,
    make_gaussian_target_from_kappa,
    make_logcosh_target,
    ostrowski_bounds,
    preconditioned_constants,
)
from .experiments import (
    ExperimentSpec,
    fit_power_law,
    run_complexity_comparison,
    run_thm5_frequency,
)

__version__ = "0.1.0"
