"""Search for separable norms squeezed between ``phi`` and ``psi``.

A counterexample to the tightness of the separable relaxation would be a
partition of ``[p]``, exponents ``q1, q2`` and positive weights with

    phi(beta) <= ||beta||_{q1,q2} <= psi(beta)   for every beta
    ||beta||_{q1,q2} < psi(beta)                 for some beta.

For finite ``q1`` both conditions are linear in the weights once raised to
the power ``q1``, so on a sample of ``beta`` the best weights solve a linear
program maximising the total slack below ``psi``. Any candidate with
positive slack is then re-checked on fresh samples and by local search for
violations; only candidates that survive count as counterexamples.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.optimize import linprog, minimize

from .groups import GroupStructure, InducedPartition, induce_partition
from .penalties import lasso_weights, lq_norm, phi, psi, weighted_lasso

__all__ = ["set_partitions", "Candidate", "SearchReport", "theorem1_search", "sample_directions"]

Q_GRID = (0.5, 1.0, 2.0, np.inf)


def set_partitions(items):
    """All partitions of ``items`` (restricted-growth enumeration)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in set_partitions(rest):
        for k in range(len(smaller)):
            yield smaller[:k] + [[first] + smaller[k]] + smaller[k + 1:]
        yield [[first]] + smaller


def sample_directions(p, rng, per_support=12, dense=60):
    """Random vectors on every nonempty support pattern, plus dense draws."""
    out = []
    for r in range(1, p + 1):
        for S in itertools.combinations(range(p), r):
            for _ in range(per_support):
                b = np.zeros(p)
                b[list(S)] = rng.standard_normal(r)
                out.append(b)
    out.extend(rng.standard_normal((dense, p)))
    return np.array(out)


def _inner(B, parts, q2):
    if np.isinf(q2):
        return np.column_stack([np.max(np.abs(B[:, P]), axis=1) for P in parts])
    return np.column_stack([np.sum(np.abs(B[:, P]) ** q2, axis=1) ** (1.0 / q2) for P in parts])


@dataclass
class Candidate:
    parts: list
    q1: float
    q2: float
    weights: np.ndarray
    max_slack: float


@dataclass
class SearchReport:
    checked: int = 0
    feasible: int = 0
    rejected_on_verification: int = 0
    counterexamples: List[Candidate] = field(default_factory=list)


def _verify(gs, upper, cand: Candidate, rng, n_fresh=4000, tol=1e-7):
    """True if no sampled or locally optimised ``beta`` violates the sandwich."""
    p = gs.p

    def ratios(b):
        n = lq_norm(b, cand.parts, cand.weights, cand.q1, cand.q2)
        lo = phi(b, gs)
        hi = upper(b)
        return lo - n, n - hi, max(hi, 1e-300)

    fresh = sample_directions(p, rng, per_support=40, dense=n_fresh)
    for b in fresh:
        a, c, scale = ratios(b)
        if a > tol * scale or c > tol * scale:
            return False
    for sign in (0, 1):
        def worst(b):
            nb = np.linalg.norm(b)
            if nb == 0:
                return 0.0
            b = b / nb
            a, c, scale = ratios(b)
            return -(a if sign == 0 else c) / scale
        for _ in range(8):
            res = minimize(worst, rng.standard_normal(p), method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
            if -res.fun > tol:
                return False
    return True


def theorem1_search(gs: GroupStructure, rng, q_grid=Q_GRID, slack_tol=1e-7, upper="psi") -> SearchReport:
    """Look for a separable ``l_{q1}/l_{q2}`` norm strictly between ``phi`` and ``psi``.

    Enumerates every partition of ``[p]`` and every ``(q1, q2)`` in ``q_grid``.
    Meant for ``p <= 4``. ``upper="wlasso"`` swaps ``psi`` for the weighted
    lasso bound, which ``psi`` itself undercuts; this is a positive control.
    """
    part: InducedPartition = induce_partition(gs)
    if upper == "psi":
        upper_fn = lambda b: psi(b, part)
    elif upper == "wlasso":
        lw = lasso_weights(gs)
        upper_fn = lambda b: weighted_lasso(b, lw)
    else:
        raise ValueError(f"unknown upper bound {upper!r}")
    B = sample_directions(gs.p, rng)
    lo = np.array([phi(b, gs) for b in B])
    hi = np.array([upper_fn(b) for b in B])
    report = SearchReport()
    for parts in set_partitions(range(gs.p)):
        parts = [np.array(P) for P in parts]
        for q1, q2 in itertools.product(q_grid, q_grid):
            report.checked += 1
            A = _inner(B, parts, q2)
            if np.isinf(q1):
                vals = A.max(axis=1)
                if np.any(vals < lo - 1e-12 * hi) or np.any(vals > hi + 1e-12 * hi):
                    continue
                w = np.ones(len(parts))
                slack = float(np.max(1.0 - vals / hi))
            else:
                Aq = A ** q1
                lo_q, hi_q = lo ** q1, hi ** q1
                # minimise sum_i (A w)_i / psi_i^q1 subject to lo^q1 <= A w <= hi^q1, w > 0
                c = (Aq / hi_q[:, None]).sum(axis=0)
                res = linprog(c, A_ub=np.vstack([-Aq, Aq]), b_ub=np.concatenate([-lo_q, hi_q]),
                              bounds=[(1e-9, None)] * len(parts), method="highs")
                if res.status != 0:
                    continue
                w = res.x
                vals = (Aq @ w) ** (1.0 / q1)
                slack = float(np.max(1.0 - vals / hi))
            report.feasible += 1
            if slack <= slack_tol:
                continue
            cand = Candidate([P.tolist() for P in parts], q1, q2, w, slack)
            if _verify(gs, upper_fn, cand, rng):
                report.counterexamples.append(cand)
            else:
                report.rejected_on_verification += 1
    return report
