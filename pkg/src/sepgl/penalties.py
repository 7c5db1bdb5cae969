"""Group norms: overlapping group lasso, its separable relaxation, weighted lasso.

Penalty objects bundle a norm with its proximal operator so the solver can
treat them uniformly:

* :class:`OverlappingGroupLasso` -- ``sum_g w_g ||beta_{G_g}||_2`` over
  possibly overlapping groups (prox by BCD).
* :class:`SeparableGroupLasso` -- the same form over a partition (closed-form
  prox). Built from :func:`~sepgl.groups.induce_partition` it is the
  separable relaxation of the overlapping norm.
* :class:`WeightedLasso` -- ``sum_j c_j |beta_j|``.
* :class:`GeneralLq` -- ``(sum_g w_g ||beta_{G_g}||_q2^q1)^(1/q1)``; value only.

For every ``beta``: ``phi(beta) <= psi(beta) <= weighted_lasso(beta)`` when
the relaxation weights and lasso weights are derived from the same groups.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .exceptions import DimensionMismatch, InvalidExponent, NonpositiveWeight
from .groups import GroupStructure, InducedPartition, induce_partition, overlap_degrees
from .prox import BCDWorkspace, PartLayout, prox_soft_threshold

__all__ = [
    "Penalty",
    "OverlappingGroupLasso",
    "SeparableGroupLasso",
    "WeightedLasso",
    "GeneralLq",
    "phi",
    "psi",
    "weighted_lasso",
    "lasso_weights",
    "lq_norm",
    "dual_upper_bound",
    "dual_estimate",
    "SandwichReport",
    "sandwich_check",
]


def _vec(beta, p):
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (p,):
        raise DimensionMismatch(f"expected a vector of length {p}, got shape {beta.shape}")
    return beta


def phi(beta, gs: GroupStructure) -> float:
    """Overlapping group lasso norm ``sum_g w_g ||beta_{G_g}||_2``."""
    beta = _vec(beta, gs.p)
    return float(sum(w * np.linalg.norm(beta[G]) for G, w in zip(gs.groups, gs.weights)))


def psi(beta, part: InducedPartition) -> float:
    """Group lasso norm over the parts of a partition."""
    beta = _vec(beta, part.p)
    norms = np.sqrt(np.bincount(part.labels, weights=beta * beta, minlength=part.n_parts))
    return float(part.weights @ norms)


def weighted_lasso(beta, c) -> float:
    c = np.asarray(c, dtype=np.float64)
    beta = _vec(beta, c.size)
    return float(c @ np.abs(beta))


def lasso_weights(gs: GroupStructure) -> np.ndarray:
    """``c_j = sum of w_g over the groups containing j``."""
    indptr, indices = gs.csr()
    return np.bincount(indices, weights=np.repeat(gs.weights, gs.sizes), minlength=gs.p)


def _qnorm(x, q):
    if np.isinf(q):
        return float(np.max(np.abs(x))) if x.size else 0.0
    return float(np.sum(np.abs(x) ** q) ** (1.0 / q))


def lq_norm(beta, groups, weights, q1, q2) -> float:
    """``(sum_g w_g ||beta_{G_g}||_{q2}^{q1})^(1/q1)``.

    ``groups`` may be a :class:`GroupStructure`, an :class:`InducedPartition`
    or a list of index arrays. ``q1 = inf`` takes the limit, i.e. the largest
    ``||beta_{G_g}||_{q2}``; the weights then only need to be positive.
    Exponents below 1 are accepted but do not give a norm.
    """
    for q in (q1, q2):
        if not (q > 0):
            raise InvalidExponent(f"exponents must lie in (0, inf], got {q}")
    if isinstance(groups, GroupStructure):
        p, groups = groups.p, groups.groups
    elif isinstance(groups, InducedPartition):
        p, groups = groups.p, groups.parts
    else:
        p = None
    beta = np.asarray(beta, dtype=np.float64)
    if p is not None and beta.shape != (p,):
        raise DimensionMismatch(f"expected a vector of length {p}, got shape {beta.shape}")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(groups),):
        raise DimensionMismatch("one weight per group is required")
    if np.any(weights <= 0):
        raise NonpositiveWeight("lq_norm weights must be positive")
    inner = np.array([_qnorm(beta[np.asarray(G)], q2) for G in groups])
    if np.isinf(q1):
        return float(inner.max())
    return float(np.sum(weights * inner ** q1) ** (1.0 / q1))


def dual_upper_bound(v, gs: GroupStructure) -> float:
    """Upper bound ``max_g ||(H v)_{G_g}||_2 / w_g`` on the dual norm of ``phi``.

    ``H = diag(1 / h_j)`` with ``h_j`` the number of groups containing ``j``.
    The bound is attained when the maximising group contains only
    variables that belong to no other group.
    """
    v = _vec(v, gs.p)
    hv = v / overlap_degrees(gs)
    return float(max(np.linalg.norm(hv[G]) / w for G, w in zip(gs.groups, gs.weights)))


class Penalty:
    """Common interface of the penalties used by the solver."""

    name = "penalty"
    scale = 1.0

    @property
    def p(self) -> int:
        raise NotImplementedError

    def value(self, beta) -> float:
        raise NotImplementedError

    def __call__(self, beta) -> float:
        return self.scale * self.value(beta)

    def make_prox(self, tol=1e-10, max_sweeps=10_000, warm_duals=False):
        """Return ``prox(mu, lam) -> (beta, sweeps)`` for ``lam * self``."""
        raise NotImplementedError

    def dual_norm(self, v) -> float:
        """Dual norm of ``self`` at ``v``, or an upper bound when not exact."""
        raise NotImplementedError

    dual_is_exact = True

    def zero_pattern_unit(self):
        """Index blocks that are zeroed together (for support accounting)."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class OverlappingGroupLasso(Penalty):
    gs: GroupStructure
    scale: float = 1.0
    name = "ogl"
    dual_is_exact = False

    @property
    def p(self):
        return self.gs.p

    def value(self, beta):
        return phi(beta, self.gs)

    def make_prox(self, tol=1e-10, max_sweeps=10_000, warm_duals=False, order="auto"):
        ws = BCDWorkspace(self.gs, order=order, warm_duals=warm_duals)
        scale = self.scale

        def prox(mu, lam):
            beta, sweeps, _ = ws.run(mu, lam * scale, tol, max_sweeps)
            return beta, sweeps

        prox.workspace = ws
        return prox

    def dual_norm(self, v):
        return dual_upper_bound(v, self.gs) / self.scale


@dataclass(frozen=True, eq=False)
class SeparableGroupLasso(Penalty):
    part: InducedPartition
    scale: float = 1.0
    name = "sep"

    @classmethod
    def from_groups(cls, gs: GroupStructure, scale=1.0):
        return cls(induce_partition(gs), scale)

    @property
    def p(self):
        return self.part.p

    def value(self, beta):
        return psi(beta, self.part)

    def make_prox(self, tol=1e-10, max_sweeps=10_000, warm_duals=False):
        layout = PartLayout(self.part)
        scale = self.scale

        def prox(mu, lam):
            return layout.shrink(mu, lam * scale), 1

        return prox

    def dual_norm(self, v):
        v = _vec(v, self.p)
        norms = np.sqrt(np.bincount(self.part.labels, weights=v * v, minlength=self.part.n_parts))
        return float(np.max(norms / self.part.weights)) / self.scale


@dataclass(frozen=True, eq=False)
class WeightedLasso(Penalty):
    c: np.ndarray
    scale: float = 1.0
    name = "wlasso"

    def __post_init__(self):
        c = np.array(self.c, dtype=np.float64)
        if np.any(c <= 0):
            raise NonpositiveWeight("lasso weights must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def from_groups(cls, gs: GroupStructure, scale=1.0):
        return cls(lasso_weights(gs), scale)

    @property
    def p(self):
        return self.c.size

    def value(self, beta):
        return weighted_lasso(beta, self.c)

    def make_prox(self, tol=1e-10, max_sweeps=10_000, warm_duals=False):
        c = self.c * self.scale

        def prox(mu, lam):
            mag = np.abs(mu) - lam * c
            out = np.where(mag > 0, np.sign(mu) * mag, 0.0)
            return out, 1

        return prox

    def dual_norm(self, v):
        v = _vec(v, self.p)
        return float(np.max(np.abs(v) / self.c)) / self.scale


@dataclass(frozen=True, eq=False)
class GeneralLq(Penalty):
    groups: tuple
    weights: np.ndarray
    q1: float
    q2: float
    p_: int
    scale: float = 1.0
    name = "lq"

    @property
    def p(self):
        return self.p_

    def value(self, beta):
        return lq_norm(_vec(beta, self.p_), self.groups, self.weights, self.q1, self.q2)


def _project_unit_ball(z, penalty: Penalty, prox, upper):
    """Project ``z`` onto ``{penalty <= 1}`` by root-finding the prox threshold."""
    if penalty(z) <= 1.0:
        return z
    f = lambda t: penalty(prox(z, t)[0]) - 1.0
    hi = upper
    while f(hi) > 0:
        hi *= 2.0
    t = brentq(f, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=200)
    return prox(z, t)[0]


def dual_estimate(v, penalty: Penalty, budget=4, seed=0, steps=15) -> float:
    """Lower estimate of ``sup {u.v : penalty(u) <= 1}`` by projected ascent.

    Each of ``budget`` restarts begins at a random point and iterates
    ``u <- P(u + eta_k v)`` with ``eta_k`` growing geometrically, where ``P``
    projects onto the unit ball through a prox with a root-found threshold.
    The returned value is ``max u.v / penalty(u)`` over all iterates, so it
    never exceeds the dual norm.
    """
    v = _vec(v, penalty.p)
    nv = np.linalg.norm(v)
    if nv == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    if isinstance(penalty, OverlappingGroupLasso):
        raw = penalty.make_prox(tol=1e-14, max_sweeps=200_000, warm_duals=True)
        ws = raw.workspace

        def prox(z, t):
            beta, sweeps, _ = ws.run(z, t * penalty.scale, 1e-15 * max(1.0, np.abs(z).max()), 200_000)
            return beta, sweeps
    else:
        prox = penalty.make_prox()
    best = 0.0
    d = v / nv
    for _ in range(budget):
        u = rng.standard_normal(penalty.p)
        u /= penalty(u)
        for k in range(steps):
            eta = 4.0 ** k / penalty.dual_norm(d) if penalty.dual_norm(d) > 0 else 4.0 ** k
            z = u + eta * d
            u = _project_unit_ball(z, penalty, prox, upper=penalty.dual_norm(z) * 1.000001)
            val = penalty(u)
            if val > 0:
                best = max(best, float(u @ v) / val)
    return best


@dataclass
class SandwichReport:
    phi: float
    psi: float
    wlasso: float
    ok: bool


def sandwich_check(gs: GroupStructure, part: Optional[InducedPartition], beta, tol=1e-12) -> SandwichReport:
    """Check ``phi <= psi <= weighted lasso`` at ``beta``.

    Tolerance is ``tol * (1 + psi)``. When ``beta`` is supported on a single
    part, ``phi == psi`` is also required to ``tol`` relative.
    """
    if part is None:
        part = induce_partition(gs)
    beta = _vec(beta, gs.p)
    a = phi(beta, gs)
    b = psi(beta, part)
    c = weighted_lasso(beta, lasso_weights(gs))
    slack = tol * (1.0 + b)
    ok = a <= b + slack and b <= c + slack
    support_parts = np.unique(part.labels[beta != 0])
    if support_parts.size == 1:
        ok = ok and abs(a - b) <= tol * max(1.0, b)
    return SandwichReport(a, b, c, bool(ok))
