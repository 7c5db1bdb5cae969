"""Seeded generators for the synthetic benchmarks.

Interlocking and nested group structures, the correlated Gaussian design,
sparse coefficient vectors and noisy responses.

Randomness comes from Philox (a counter-based generator). :func:`substream`
derives an independent generator for each ``(seed, replicate, purpose)`` so a
replicate is reproducible regardless of the order in which replicates run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import AllZeroTruth, DimensionMismatch, FactorizationFailure, InvalidOverlap
from .groups import GroupStructure, InducedPartition, induce_partition

__all__ = [
    "SimSpec",
    "substream",
    "group_weights",
    "interlocking_groups",
    "nested_groups",
    "build_covariance",
    "sample_design",
    "gen_beta_star",
    "gen_response",
    "alt_weights",
    "SimData",
    "simulate",
]

PURPOSES = {"design": 0, "beta": 1, "noise": 2, "structure": 3}


def substream(seed: int, replicate: int = 0, purpose: str = "design") -> np.random.Generator:
    """Independent Philox generator for one replicate and one generated object."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate), PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(ss))


def group_weights(sizes, rule="sqrt"):
    sizes = np.asarray(sizes, dtype=np.float64)
    if rule == "sqrt":
        return np.sqrt(sizes)
    if rule == "inverse":
        return 1.0 / sizes
    if rule == "uniform":
        return np.ones_like(sizes)
    raise ValueError(f"unknown weight rule {rule!r}")


def interlocking_groups(m, d, overlap_frac=0.2, weight_rule="sqrt") -> GroupStructure:
    """Chain of ``m`` groups of size ``d``; neighbours share ``round(overlap_frac * d)`` variables.

    Examples
    --------
    >>> interlocking_groups(400, 40).p
    12808
    """
    o = int(round(overlap_frac * d))
    if m < 1:
        raise InvalidOverlap("m must be at least 1")
    if not 1 <= o <= d - 1:
        raise InvalidOverlap(f"overlap {o} must lie in [1, d - 1] for d={d}")
    step = d - o
    groups = [np.arange(g * step, g * step + d) for g in range(m)]
    p = m * d - (m - 1) * o
    return GroupStructure(p, groups, group_weights([d] * m, weight_rule))


def nested_groups(m, step=4, weight_rule="inverse") -> GroupStructure:
    """Chain ``G_1 ⊂ G_2 ⊂ ...`` with ``|G_g| = g * step``; ``p = m * step``."""
    if m < 1 or step < 1:
        raise ValueError("m and step must be positive")
    groups = [np.arange((g + 1) * step) for g in range(m)]
    return GroupStructure(m * step, groups, group_weights([len(G) for G in groups], weight_rule))


def build_covariance(gs: GroupStructure, part: Optional[InducedPartition] = None, mode="interlocking",
                     min_eig=0.1) -> np.ndarray:
    """Correlation template projected onto ``{A = A^T, lambda_min(A) >= min_eig}``.

    Off-diagonal entries are 0.6 within an induced part, 0.36 for variables
    sharing an original group but not a part, and 0 otherwise. The projection
    clamps eigenvalues of the symmetrised template from below; the diagonal
    is not renormalised afterwards.

    ``mode`` is kept for the two benchmark recipes. They differ only in the
    zero case, which a nested chain never reaches, so both build the same
    matrix.
    """
    if mode not in ("interlocking", "nested"):
        raise ValueError(f"unknown covariance mode {mode!r}")
    if part is None:
        part = induce_partition(gs)
    M = gs.membership_matrix().astype(np.float64)
    share_group = (M.T @ M).toarray() > 0
    labels = part.labels
    same_part = labels[:, None] == labels[None, :]
    theta = np.where(same_part, 0.6, np.where(share_group, 0.36, 0.0))
    np.fill_diagonal(theta, 1.0)
    theta = 0.5 * (theta + theta.T)
    vals, vecs = np.linalg.eigh(theta)
    if vals.min() >= min_eig:
        return theta
    vals = np.maximum(vals, min_eig)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def sample_design(n, theta, rng: np.random.Generator) -> np.ndarray:
    """``n`` rows drawn i.i.d. from ``N(0, theta)`` through a Cholesky factor."""
    theta = np.asarray(theta, dtype=np.float64)
    try:
        chol = np.linalg.cholesky(theta)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure(f"covariance is not positive definite: {exc}") from exc
    Z = rng.standard_normal((n, theta.shape[0]))
    return Z @ chol.T


def gen_beta_star(gs: GroupStructure, zero_frac, rng: np.random.Generator, rule="random") -> np.ndarray:
    """Coefficients ``N(10, 16)`` with random signs and whole groups zeroed.

    ``rule="random"`` zeroes ``ceil(zero_frac * m)`` groups chosen uniformly;
    ``rule="nested"`` zeroes every member of group ``ceil(zero_frac * m)``
    (1-based), i.e. the first groups of a nested chain.
    """
    if not 0 <= zero_frac < 1:
        raise ValueError("zero_frac must lie in [0, 1)")
    beta = rng.normal(10.0, 4.0, size=gs.p)
    flips = rng.random(gs.p) < 0.5
    beta[flips] = -beta[flips]
    k = math.ceil(round(zero_frac * gs.m, 9))
    if k > 0:
        if rule == "random":
            chosen = rng.choice(gs.m, size=k, replace=False)
            for g in chosen:
                beta[gs.groups[g]] = 0.0
        elif rule == "nested":
            beta[gs.groups[k - 1]] = 0.0
        else:
            raise ValueError(f"unknown zeroing rule {rule!r}")
    if not np.any(beta):
        raise AllZeroTruth("every coefficient was zeroed; reseed")
    return beta


def gen_response(X, beta_star, sigma2, rng: np.random.Generator) -> np.ndarray:
    """``y = X beta* + eps`` with ``eps ~ N(0, sigma2)``."""
    X = np.asarray(X, dtype=np.float64)
    beta_star = np.asarray(beta_star, dtype=np.float64)
    if X.shape[1] != beta_star.size:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, beta* has {beta_star.size} entries")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return X @ beta_star + rng.normal(0.0, math.sqrt(sigma2), size=X.shape[0])


def alt_weights(part: InducedPartition, scheme="proposed", base_rule="sqrt") -> np.ndarray:
    """Part weights: ``proposed`` (summed group weights), ``uniform`` or ``size`` (sqrt or 1/size)."""
    if scheme == "proposed":
        return np.array(part.weights)
    if scheme == "uniform":
        return np.ones(part.n_parts)
    if scheme == "size":
        return group_weights(part.sizes, base_rule)
    raise ValueError(f"unknown weighting scheme {scheme!r}")


@dataclass
class SimSpec:
    """Synthetic benchmark settings.

    ``structure`` is ``"interlocking"`` (uses ``m``, ``d``, ``overlap_frac``)
    or ``"nested"`` (uses ``m``, ``step``).
    """

    structure: str = "interlocking"
    m: int = 5
    d: int = 10
    overlap_frac: float = 0.2
    step: int = 4
    n: int = 100
    sigma2: float = 3.0
    zero_frac: float = 0.9
    weight_rule: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.structure not in ("interlocking", "nested"):
            raise ValueError(f"unknown structure {self.structure!r}")
        if not 0 < self.overlap_frac < 0.5:
            raise ValueError("overlap_frac must lie in (0, 0.5)")
        if not 0 <= self.zero_frac < 1:
            raise ValueError("zero_frac must lie in [0, 1)")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.weight_rule is None:
            self.weight_rule = "sqrt" if self.structure == "interlocking" else "inverse"

    def groups(self) -> GroupStructure:
        if self.structure == "interlocking":
            return interlocking_groups(self.m, self.d, self.overlap_frac, self.weight_rule)
        return nested_groups(self.m, self.step, self.weight_rule)


@dataclass
class SimData:
    gs: GroupStructure
    part: InducedPartition
    theta: np.ndarray
    X: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray


def simulate(spec: SimSpec, replicate=0, gs: Optional[GroupStructure] = None,
             theta: Optional[np.ndarray] = None) -> SimData:
    """One replicate of the benchmark. ``gs``/``theta`` may be passed in to skip rebuilding them."""
    gs = gs or spec.groups()
    part = induce_partition(gs)
    if theta is None:
        theta = build_covariance(gs, part, mode=spec.structure)
    X = sample_design(spec.n, theta, substream(spec.seed, replicate, "design"))
    rule = "random" if spec.structure == "interlocking" else "nested"
    beta_star = gen_beta_star(gs, spec.zero_frac, substream(spec.seed, replicate, "beta"), rule)
    y = gen_response(X, beta_star, spec.sigma2, substream(spec.seed, replicate, "noise"))
    return SimData(gs, part, theta, X, y, beta_star)
