"""Interacting-particle simulation and verification toolkit.

Couples a clamped Euler step for mollified pairwise drifts with a
pseudospectral aggregation-diffusion solver, and checks empirical
convergence rates against the exponents the theory predicts.
"""

__version__ = "0.1.0"

from .bumps import MollifierParams, mollifier_eval, mollifier_radial
from .kernels import (
    BoundedLipschitzDemo,
    CutoffSpec,
    KellerSegel,
    KernelAssumptions,
    KernelDomainError,
    KernelSpec,
    RieszGradient,
    TabulatedCustom,
    TruncatedRiesz,
    assumptions_for,
    cutoff_apply,
    eval_kernel,
    zero_kernel,
)
from .tabulate import (
    TabulatedKernel,
    build_tabulated_kernel,
    get_tabulated_kernel,
    mollified_kernel_eval,
)
from .engine import engine_name, pair_sum
from .streams import BrownianBlock, init_normals, replica_generator
from .grids import GridField, GridSpec, read_field, write_field
from .initial import GaussianMixture, GridFieldSampler, IsotropicGaussian
from .particles import (
    EnsembleState,
    SimConfig,
    em_step,
    mollified_empirical_measure,
    replica_density_estimate,
    simulate,
)
from .pde import PdeAbort, PdeConfig, PdeSolution, solve_mild
from .metrics import (
    ErrorRecord,
    bootstrap_moment_interval,
    l1_lr_norm,
    lp_norm,
    moment_over_replicas,
    sup_time_error,
    weighted_marginal_error,
)
from .rates import (
    FitResult,
    RateExponents,
    cost_exponent,
    coupled_exponent,
    coupled_h,
    exponents,
    fit_loglog,
    optimal_alpha,
    summary,
)
from .config import ExperimentConfig, ConfigError, config_hash, load_config
from .harness import run_sweep, run_thm2, report

__all__ = [
    "__version__",
    "MollifierParams", "mollifier_eval", "mollifier_radial",
    "BoundedLipschitzDemo", "CutoffSpec", "KellerSegel",
    "KernelAssumptions", "KernelDomainError", "KernelSpec",
    "RieszGradient", "TabulatedCustom", "TruncatedRiesz",
    "assumptions_for", "cutoff_apply", "eval_kernel", "zero_kernel",
    "TabulatedKernel", "build_tabulated_kernel", "get_tabulated_kernel",
    "mollified_kernel_eval",
    "engine_name", "pair_sum",
    "BrownianBlock", "init_normals", "replica_generator",
    "GridField", "GridSpec", "read_field", "write_field",
    "GaussianMixture", "GridFieldSampler", "IsotropicGaussian",
    "EnsembleState", "SimConfig", "em_step",
    "mollified_empirical_measure", "replica_density_estimate", "simulate",
    "PdeAbort", "PdeConfig", "PdeSolution", "solve_mild",
    "ErrorRecord", "bootstrap_moment_interval", "l1_lr_norm", "lp_norm",
    "moment_over_replicas", "sup_time_error", "weighted_marginal_error",
    "FitResult", "RateExponents", "cost_exponent", "coupled_exponent",
    "coupled_h", "exponents", "fit_loglog", "optimal_alpha", "summary",
    "ExperimentConfig", "ConfigError", "config_hash", "load_config",
    "run_sweep", "run_thm2", "report",
]
