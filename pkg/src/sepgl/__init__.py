"""Overlapping group lasso and its separable relaxation on the overlap-induced partition."""

__version__ = "0.1.0"

from .exceptions import SepGLError
from .groups import (
    GroupStructure,
    InducedPartition,
    assumption_ratio,
    induce_partition,
    is_tree_structured,
    overlap_degrees,
    validate,
)
from .penalties import (
    GeneralLq,
    OverlappingGroupLasso,
    SeparableGroupLasso,
    WeightedLasso,
    dual_estimate,
    dual_upper_bound,
    lq_norm,
    phi,
    psi,
    sandwich_check,
    weighted_lasso,
)
from .prox import prox_certificate, prox_overlapping_bcd, prox_separable, prox_soft_threshold
from .solver import Problem, Solution, SolveConfig, fit, kkt_gap
from .path import PathResult, best_metrics, log_grid, regularization_path, solve_path
