"""Simulation and Monte Carlo tools for trapezoidal Stratonovich sums of
fractional-type Gaussian processes."""

from .conditions import (
    ConditionReport,
    ExponentSet,
    audit_all,
    check_condition_i,
    check_condition_ii,
    check_condition_iii,
    check_condition_iv,
    check_condition_v,
    check_condition_vi,
    default_exponents,
)
from .constants import (
    EtaFunction,
    SeriesValue,
    c_h,
    c_K,
    core_series_S,
    critical_constant,
    cross_block_eta,
    empirical_eta,
    eta_fn,
)
from .errors import (
    InvalidVarianceError,
    NotPositiveSemidefiniteError,
    ParameterDomainError,
    StratlabError,
    UnsupportedFamilyError,
    UnsupportedRegimeError,
    WrongExperimentError,
)
from .kernels import (
    CovarianceKernel,
    Family,
    GridSpec,
    beta,
    beta_matrix,
    eval_R,
    psi_phi_decomposition,
    split_scale,
)
from .limitlaw import LimitSample, conditional_variance, sample_limit, sample_limit_ensemble
from .mc import Experiment, ExperimentConfig, ExperimentResult, run_experiment
from .sampler import (
    CovarianceFactor,
    PathEnsemble,
    SamplePath,
    factorize,
    sample_bm,
    sample_path,
    sample_paths,
)
from .stats import correlation, ks_two_sample, moments
from .variation import (
    TestFunction,
    cubic_variation,
    fifth_order_sum,
    increment_of_f,
    phi_n,
    taylor_remainder,
    third_order_sum,
    y_n_term,
)

__version__ = "0.1.0"
