"""Spin broadcasting on trees with i.i.d. random edge couplings.

A library and CLI for spin systems with i.i.d. random edge couplings on
trees (including the Gaussian special case): threshold computation,
broadcasting and exact inference, edge influences and coupling bounds,
root-reconstruction estimators, and reproducible phase scans.
"""

from .broadcast import BroadcastMatrix, broadcast_sample, matrix_from_coupling, sample_couplings
from .distributions import (
    CouplingDistribution,
    KsReport,
    OffspringDistribution,
    classic_ks_degree,
    critical_beta,
    expected_gamma_sq,
    sample_coupling,
    sample_offspring,
    xi_lambda4,
)
from .estimators import (
    ESTIMATOR_KINDS,
    RatioBound,
    delta_ary_ratio_bound,
    estimate_root,
    evaluate_estimator,
    flip_moment_gap,
    flip_second_moment,
    gw_ratio_bound,
)
from .inference import (
    CapacityError,
    ExactGibbs,
    GibbsInstance,
    PosteriorPair,
    brute_force_gibbs,
    downup_marginal_exact,
    log_ratio_root,
    root_posterior,
    tv_leaf_conditional_exact,
    tv_monte_carlo,
)
from .influence import (
    InfluenceAssignment,
    down_coupling_simulate,
    gradient_sup_check,
    influences,
    tv_upper_bound,
)
from .model import (
    CouplingAssignment,
    GibbsParams,
    RootedTree,
    SpinConfig,
    common_ancestor,
    path_edges,
)
from .scan import ScanConfig, ScanResult, parse_scan_csv, run_estimator_bench, run_scan
from .seeds import mix64, trial_rng
from .treegen import TreeBudgetError, TreeSpec, build_tree, level_set
from .verify import run_verification

__version__ = "0.1.0"

__all__ = [
    "BroadcastMatrix",
    "CapacityError",
    "CouplingAssignment",
    "CouplingDistribution",
    "ESTIMATOR_KINDS",
    "ExactGibbs",
    "GibbsInstance",
    "GibbsParams",
    "InfluenceAssignment",
    "KsReport",
    "OffspringDistribution",
    "PosteriorPair",
    "RatioBound",
    "RootedTree",
    "ScanConfig",
    "ScanResult",
    "SpinConfig",
    "TreeBudgetError",
    "TreeSpec",
    "broadcast_sample",
    "brute_force_gibbs",
    "build_tree",
    "classic_ks_degree",
    "common_ancestor",
    "critical_beta",
    "delta_ary_ratio_bound",
    "down_coupling_simulate",
    "downup_marginal_exact",
    "estimate_root",
    "evaluate_estimator",
    "expected_gamma_sq",
    "flip_moment_gap",
    "flip_second_moment",
    "gradient_sup_check",
    "gw_ratio_bound",
    "influences",
    "level_set",
    "log_ratio_root",
    "matrix_from_coupling",
    "mix64",
    "parse_scan_csv",
    "path_edges",
    "root_posterior",
    "run_estimator_bench",
    "run_scan",
    "run_verification",
    "sample_coupling",
    "sample_couplings",
    "sample_offspring",
    "tv_leaf_conditional_exact",
    "tv_monte_carlo",
    "tv_upper_bound",
    "trial_rng",
    "xi_lambda4",
]
