"""Adequacy testing for high-dimensional factor-augmented regression.

Estimates latent factors of a covariate panel by principal components and
tests whether the factor regression alone explains the response, via a
max-type statistic (Gumbel-calibrated), a quadratic-type statistic
(normal-calibrated), and their Fisher combination (chi-square(4)).
"""

from .adequacy import (
    PValueSet,
    StatisticSet,
    TestReport,
    chi4_quantile,
    chi4_survival,
    compute_statistics,
    critical_value_max,
    gumbel_cdf,
    gumbel_survival,
    m_statistic,
    max_statistic,
    noise_variance,
    p_values,
    quad_statistic,
    run_tests,
    std_normal_cdf,
    std_normal_quantile,
    std_normal_survival,
    trace_estimator,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateDataError,
    DomainError,
    FarmtestError,
    FormatError,
    NumericalError,
    StructuralError,
)
from .estimator import FactorAdequacyTest
from .factor_model import (
    DataMatrixPair,
    FactorFit,
    estimate_factors,
    fit_factor_model,
    fit_gamma,
    residualize,
)
from .fredmd import (
    AnalysisProblem,
    MacroDataset,
    apply_tcode,
    build_problem,
    load_fredmd,
    parse_fredmd,
)
from .simulate import (
    BetaPattern,
    CellResult,
    NullDiagnostics,
    SimCell,
    gen_dataset,
    make_beta,
    null_joint_diagnostics,
    power_curve,
    run_cell,
    sample_ar1,
)
from .spectra import (
    SymmetricSpectrum,
    default_kmax,
    eigenvalue_ratio_khat,
    sym_eigen_topk,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisProblem",
    "BetaPattern",
    "CellResult",
    "ConfigError",
    "DataError",
    "DataMatrixPair",
    "DegenerateDataError",
    "DomainError",
    "FactorAdequacyTest",
    "FactorFit",
    "FarmtestError",
    "FormatError",
    "MacroDataset",
    "NullDiagnostics",
    "NumericalError",
    "PValueSet",
    "SimCell",
    "StatisticSet",
    "StructuralError",
    "SymmetricSpectrum",
    "TestReport",
    "apply_tcode",
    "build_problem",
    "chi4_quantile",
    "chi4_survival",
    "compute_statistics",
    "critical_value_max",
    "default_kmax",
    "eigenvalue_ratio_khat",
    "estimate_factors",
    "fit_factor_model",
    "fit_gamma",
    "gen_dataset",
    "gumbel_cdf",
    "gumbel_survival",
    "load_fredmd",
    "m_statistic",
    "make_beta",
    "max_statistic",
    "noise_variance",
    "null_joint_diagnostics",
    "p_values",
    "parse_fredmd",
    "power_curve",
    "quad_statistic",
    "residualize",
    "run_cell",
    "run_tests",
    "sample_ar1",
    "std_normal_cdf",
    "std_normal_quantile",
    "std_normal_survival",
    "sym_eigen_topk",
    "trace_estimator",
]
