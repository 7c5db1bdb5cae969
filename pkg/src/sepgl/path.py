"""Regularization paths with line-searched endpoints.

``lam_max`` is located by walking down from 1e8 by factors of 0.9 until a
variable enters; ``lam_min`` by walking up from 1e-8 by factors of 1.1 until a
variable leaves. The path is then solved on a log-spaced grid from large to
small ``lam``, each solve warm-started from the previous one.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .exceptions import InvalidRange, NoFullSupport, PathError, SearchExhausted, SepGLError, ZeroTruth
from .metrics import relative_l2_error, support_discrepancy
from .penalties import Penalty
from .solver import ProximalGradient, Problem, Solution, SolveConfig

__all__ = [
    "PathResult",
    "find_lambda_max",
    "find_lambda_min",
    "log_grid",
    "solve_path",
    "best_metrics",
    "regularization_path",
]

LAMBDA_MAX_START = 1e8
LAMBDA_MAX_FACTOR = 0.9
LAMBDA_MIN_START = 1e-8
LAMBDA_MIN_FACTOR = 1.1
SEARCH_TOL = 1e-4


@dataclass
class PathResult:
    lambdas: np.ndarray
    solutions: List[Solution]
    support_sizes: np.ndarray
    total_time: float
    lambda_max: float = float("nan")
    lambda_min: float = float("nan")
    search_time: float = 0.0
    lambda_min_floored: bool = False

    def coefs(self) -> np.ndarray:
        return np.array([s.beta for s in self.solutions])


def _solver(problem, penalty, solver):
    return solver if solver is not None else ProximalGradient(problem, penalty, SolveConfig())


def find_lambda_max(problem: Problem, penalty: Penalty, solver: Optional[ProximalGradient] = None,
                    tol=SEARCH_TOL, start=LAMBDA_MAX_START, factor=LAMBDA_MAX_FACTOR, floor=1e-12) -> float:
    """Smallest ``start * factor**k`` whose solution is all-zero before a variable enters."""
    solver = _solver(problem, penalty, solver)
    lam = start
    beta = None
    last_zero = None
    while lam >= floor:
        sol = solver.solve(lam, tol=tol, warm_start=beta)
        if np.any(sol.beta):
            if last_zero is None:
                raise SearchExhausted(f"variables already selected at the starting lambda {start}")
            return last_zero
        last_zero = lam
        beta = sol.beta
        lam *= factor
    raise SearchExhausted(f"no variable selected for any lambda down to {floor}")


def find_lambda_min(problem: Problem, penalty: Penalty, solver: Optional[ProximalGradient] = None,
                    tol=SEARCH_TOL, start=LAMBDA_MIN_START, factor=LAMBDA_MIN_FACTOR, ceiling=None) -> float:
    """Largest ``start * factor**k`` whose solution keeps every variable before one drops.

    Raises :class:`NoFullSupport` when even ``start`` drops a variable.
    """
    solver = _solver(problem, penalty, solver)
    ceiling = ceiling if ceiling is not None else LAMBDA_MAX_START
    lam = start
    beta = None
    last_full = None
    while lam <= ceiling:
        sol = solver.solve(lam, tol=tol, warm_start=beta)
        if not np.all(sol.beta != 0):
            if last_full is None:
                raise NoFullSupport(f"the solution at lambda={start} already drops variables")
            return last_full
        last_full = lam
        beta = sol.beta
        lam *= factor
    return last_full


def log_grid(lambda_min, lambda_max, k=50) -> np.ndarray:
    """``k`` log-spaced values from ``lambda_max`` down to ``lambda_min``, endpoints included."""
    if not (0 < lambda_min <= lambda_max) or k < 1:
        raise InvalidRange(f"need 0 < lambda_min <= lambda_max and k >= 1, got ({lambda_min}, {lambda_max}, {k})")
    if k == 1:
        return np.array([float(lambda_max)])
    grid = np.geomspace(lambda_max, lambda_min, k)
    grid[0], grid[-1] = lambda_max, lambda_min
    return grid


def solve_path(problem: Problem, penalty: Penalty, grid, config: Optional[SolveConfig] = None,
               solver: Optional[ProximalGradient] = None) -> PathResult:
    """Warm-started solves along a descending grid; ``total_time`` covers the loop only."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size > 1 and np.any(np.diff(grid) > 0):
        raise InvalidRange("the grid must be in descending order")
    config = config or SolveConfig()
    solver = solver or ProximalGradient(problem, penalty, config)
    solutions = []
    beta = config.warm_start
    start = time.perf_counter()
    for lam in grid:
        try:
            sol = solver.solve(lam, warm_start=beta)
        except SepGLError as exc:
            raise PathError(float(lam), exc) from exc
        solutions.append(sol)
        beta = sol.beta
    total = time.perf_counter() - start
    sizes = np.array([np.count_nonzero(s.beta) for s in solutions], dtype=np.int64)
    return PathResult(lambdas=grid, solutions=solutions, support_sizes=sizes, total_time=total)


def regularization_path(problem: Problem, penalty: Penalty, config: Optional[SolveConfig] = None,
                        k=50) -> PathResult:
    """Line-search both endpoints, then solve the ``k``-point path.

    When no ``lambda`` keeps every variable the lower end falls back to 1e-8
    and ``lambda_min_floored`` is set.
    """
    config = config or SolveConfig()
    solver = ProximalGradient(problem, penalty, config)
    t0 = time.perf_counter()
    lam_max = find_lambda_max(problem, penalty, solver)
    floored = False
    try:
        lam_min = find_lambda_min(problem, penalty, solver, ceiling=lam_max)
    except NoFullSupport:
        lam_min, floored = LAMBDA_MIN_START, True
    if lam_min is None or lam_min > lam_max:
        lam_min, floored = LAMBDA_MIN_START, True
    search_time = time.perf_counter() - t0
    result = solve_path(problem, penalty, log_grid(lam_min, lam_max, k), config, solver)
    result.lambda_max = lam_max
    result.lambda_min = lam_min
    result.search_time = search_time
    result.lambda_min_floored = floored
    return result


def best_metrics(path: PathResult, beta_star) -> Tuple[float, float]:
    """Smallest relative error and smallest support discrepancy over the path (independently)."""
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if not np.any(beta_star):
        raise ZeroTruth("beta* is zero")
    errs = [relative_l2_error(s.beta, beta_star) for s in path.solutions]
    disc = [support_discrepancy(s.beta, beta_star) for s in path.solutions]
    return min(errs), min(disc)
