"""Resolvent families and mild solutions for abstract equations with memory.

    u'(t) = int_0^t g(t - s) A u(s) ds + f(t, u(t)),   u(0) = u0,

with A the Dirichlet Laplacian on a box, realised diagonally in a sine basis.
"""

from .errors import (
    AccuracyError,
    ConfigError,
    ContourError,
    DomainError,
    GridError,
    MemresError,
    OverflowGuardError,
    PreconditionError,
    RegimeError,
    ResolutionError,
    SamplingError,
)
from .exponents import (
    EpsRegularParams,
    hj_remark_threshold,
    hj_wellposed_params,
    ns_wellposed_params,
    rd_wellposed_params,
    subcritical_gap,
)
from .kernel import KernelTerm, MaterialKernel, SectorReport, check_hypotheses, eval_a, laplace_g, parse_kernel
from .mild import (
    MildProblem,
    MildSolution,
    NonlinearitySpec,
    WellPosednessBudget,
    certified_existence_time,
    continue_mild,
    eps_regular_profile,
    lipschitz_dependence,
    probe_time,
    solve_mild,
)
from .resolvent import (
    ScalarResolventTable,
    fit_smoothing_rate,
    log_continuity_ratios,
    mode_tables,
    scalar_resolvent_talbot,
    scalar_resolvent_volterra,
    talbot_inverse,
)
from .spectral import ScaleVector, SpectralOperator, build_operator, scale_norm, transform
from .specfun import beta, i_kappa, incomplete_beta, log_gamma, mittag_leffler

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ConfigError",
    "ContourError",
    "DomainError",
    "GridError",
    "MemresError",
    "OverflowGuardError",
    "PreconditionError",
    "RegimeError",
    "ResolutionError",
    "SamplingError",
    "EpsRegularParams",
    "hj_remark_threshold",
    "hj_wellposed_params",
    "ns_wellposed_params",
    "rd_wellposed_params",
    "subcritical_gap",
    "KernelTerm",
    "MaterialKernel",
    "SectorReport",
    "check_hypotheses",
    "eval_a",
    "laplace_g",
    "parse_kernel",
    "MildProblem",
    "MildSolution",
    "NonlinearitySpec",
    "WellPosednessBudget",
    "certified_existence_time",
    "continue_mild",
    "eps_regular_profile",
    "lipschitz_dependence",
    "probe_time",
    "solve_mild",
    "ScalarResolventTable",
    "fit_smoothing_rate",
    "log_continuity_ratios",
    "mode_tables",
    "scalar_resolvent_talbot",
    "scalar_resolvent_volterra",
    "talbot_inverse",
    "ScaleVector",
    "SpectralOperator",
    "build_operator",
    "scale_norm",
    "transform",
    "beta",
    "i_kappa",
    "incomplete_beta",
    "log_gamma",
    "mittag_leffler",
]
