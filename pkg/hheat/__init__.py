"""hheat: semilinear heat equation u_t - Delta_H u = -k(t) u^p on the Heisenberg group."""

from .asymptotics import (
    capacity_functional,
    condition_check,
    cutoff_lemma_check,
    dichotomy_sweep,
    profile_convergence,
    profile_lemma_check,
    small_data_scan,
    taylor_expansion_check,
)
from .config import RunConfig, parse_config
from .digest import hash_state
from .errors import ConfigError, HeatError, InvariantViolation, NumericalError, QuadratureError, UsageError
from .field import GridField, GridSpec
from .heatkernel import KernelTable, group_convolve, heat_semigroup_apply, kernel_value, tabulate_kernel
from .hgroup import GroupDim, HPoint, dilate, group_inv, group_mul, koranyi_dist, koranyi_norm
from .montecarlo import McConfig, compare_with_kernel, estimate_density, sample_paths
from .report import CheckResult, VerifyReport
from .solver import AbsorptionProfile, InitialData, SolverConfig, evolve
from .storage import KernelCache
from .trace import MassTrace

__version__ = "0.3.0"

__all__ = [
    "AbsorptionProfile",
    "CheckResult",
    "ConfigError",
    "GridField",
    "GridSpec",
    "GroupDim",
    "HPoint",
    "HeatError",
    "InitialData",
    "InvariantViolation",
    "KernelCache",
    "KernelTable",
    "MassTrace",
    "McConfig",
    "NumericalError",
    "QuadratureError",
    "RunConfig",
    "SolverConfig",
    "UsageError",
    "VerifyReport",
    "capacity_functional",
    "compare_with_kernel",
    "condition_check",
    "cutoff_lemma_check",
    "dichotomy_sweep",
    "dilate",
    "estimate_density",
    "evolve",
    "group_convolve",
    "group_inv",
    "group_mul",
    "hash_state",
    "heat_semigroup_apply",
    "kernel_value",
    "koranyi_dist",
    "koranyi_norm",
    "parse_config",
    "profile_convergence",
    "profile_lemma_check",
    "sample_paths",
    "small_data_scan",
    "tabulate_kernel",
    "taylor_expansion_check",
]
