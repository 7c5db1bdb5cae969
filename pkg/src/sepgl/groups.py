"""Overlapping group structures and their overlap-induced partition.

A :class:`GroupStructure` holds ``m`` possibly overlapping groups over ``p``
variables. :func:`induce_partition` splits the variables into the coarsest
partition whose parts have identical group memberships, and gives each part
the sum of the weights of the groups containing it.

Indices are 0-based throughout; the file formats in :mod:`sepgl.io` are
1-based and convert at the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .exceptions import (
    EmptyGroup,
    GroupStructureError,
    IndexOutOfRange,
    NonpositiveWeight,
    UncoveredVariable,
)

__all__ = [
    "GroupStructure",
    "InducedPartition",
    "validate",
    "overlap_degrees",
    "induce_partition",
    "assumption_ratio",
    "is_tree_structured",
]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Possibly overlapping groups over ``p`` variables.

    Parameters
    ----------
    p : int
        Number of variables.
    groups : sequence of sequences of int
        Member indices of each group (0-based). Stored sorted.
    weights : sequence of float, optional
        Positive weight per group; defaults to ``sqrt(|G_g|)``.
    names : sequence of str, optional
        Label per group; defaults to ``G1, G2, ...``.
    check : bool
        Run :func:`validate` on construction.

    Duplicate groups (same member set) are allowed and kept distinct.
    """

    p: int
    groups: tuple
    weights: np.ndarray = None
    names: tuple = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        groups = []
        for g, members in enumerate(self.groups):
            arr = np.sort(np.asarray(members, dtype=np.int64).ravel())
            if arr.size > 1 and np.any(np.diff(arr) == 0):
                raise GroupStructureError(f"group {g} lists an index twice", group=g)
            arr.setflags(write=False)
            groups.append(arr)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "groups", tuple(groups))
        if self.weights is None:
            w = [np.sqrt(len(G)) for G in groups]
        else:
            w = self.weights
        object.__setattr__(self, "weights", _frozen(w, np.float64))
        if self.names is None:
            names = tuple(f"G{g + 1}" for g in range(len(groups)))
        else:
            names = tuple(str(s) for s in self.names)
        object.__setattr__(self, "names", names)
        if len(self.weights) != len(groups) or len(names) != len(groups):
            raise GroupStructureError("groups, weights and names differ in length")
        if self.check:
            validate(self)

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(G) for G in self.groups], dtype=np.int64)

    @property
    def d_max(self) -> int:
        return int(self.sizes.max())

    def with_weights(self, weights) -> "GroupStructure":
        return GroupStructure(self.p, self.groups, weights, self.names)

    def csr(self):
        """Return ``(indptr, indices)`` with group ``g`` at ``indices[indptr[g]:indptr[g+1]]``."""
        indptr = np.zeros(self.m + 1, dtype=np.int64)
        np.cumsum(self.sizes, out=indptr[1:])
        if self.m:
            indices = np.concatenate(self.groups).astype(np.int64)
        else:
            indices = np.zeros(0, dtype=np.int64)
        return indptr, indices

    def membership_matrix(self) -> sparse.csr_matrix:
        """Binary ``m x p`` matrix with entry ``(g, j)`` set iff ``j`` is in group ``g``."""
        indptr, indices = self.csr()
        data = np.ones(indices.size, dtype=np.int64)
        return sparse.csr_matrix((data, indices, indptr), shape=(self.m, self.p))

    def __eq__(self, other):
        if not isinstance(other, GroupStructure):
            return NotImplemented
        return (
            self.p == other.p
            and self.m == other.m
            and all(np.array_equal(a, b) for a, b in zip(self.groups, other.groups))
            and np.array_equal(self.weights, other.weights)
            and self.names == other.names
        )

    __hash__ = None


def validate(gs: GroupStructure) -> None:
    """Check the invariants of ``gs``, raising on the first violation.

    Raises
    ------
    EmptyGroup, IndexOutOfRange, UncoveredVariable, NonpositiveWeight
    """
    if gs.p < 1:
        raise GroupStructureError(f"p must be positive, got {gs.p}")
    if gs.m < 1:
        raise GroupStructureError("at least one group is required")
    covered = np.zeros(gs.p, dtype=bool)
    for g, G in enumerate(gs.groups):
        if G.size == 0:
            raise EmptyGroup(f"group {g} is empty", group=g)
        if G[0] < 0 or G[-1] >= gs.p:
            bad = int(G[0] if G[0] < 0 else G[-1])
            raise IndexOutOfRange(f"group {g} contains index {bad} outside [0, {gs.p})", group=g)
        covered[G] = True
    if not covered.all():
        raise UncoveredVariable(int(np.flatnonzero(~covered)[0]))
    for g, w in enumerate(gs.weights):
        if not (np.isfinite(w) and w > 0):
            raise NonpositiveWeight(f"group {g} has weight {w}", group=g)


def overlap_degrees(gs: GroupStructure) -> np.ndarray:
    """Number of groups containing each variable."""
    _, indices = gs.csr()
    return np.bincount(indices, minlength=gs.p).astype(np.int64)


@dataclass(frozen=True, eq=False)
class InducedPartition:
    """Disjoint parts of ``[p]`` with the weights and memberships inherited from ``G``.

    ``signatures[k]`` is the sorted tuple of original group ids containing
    part ``k``; ``degree[k]`` is its length.
    """

    p: int
    parts: tuple
    weights: np.ndarray
    signatures: tuple
    degree: np.ndarray
    labels: np.ndarray = field(repr=False)

    @property
    def n_parts(self) -> int:
        return len(self.parts)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(P) for P in self.parts], dtype=np.int64)

    @property
    def d_max(self) -> int:
        return int(self.sizes.max())

    @classmethod
    def from_parts(cls, p, parts, weights) -> "InducedPartition":
        """Wrap an explicit partition (e.g. with alternative weights).

        Signatures are set to the part's own index, degrees to 1.
        """
        parts = tuple(_frozen(np.sort(np.asarray(P, dtype=np.int64)), np.int64) for P in parts)
        labels = np.full(p, -1, dtype=np.int64)
        for k, P in enumerate(parts):
            if np.any(labels[P] >= 0):
                raise GroupStructureError("parts overlap", group=k)
            labels[P] = k
        if np.any(labels < 0):
            raise UncoveredVariable(int(np.flatnonzero(labels < 0)[0]))
        weights = _frozen(weights, np.float64)
        if weights.shape != (len(parts),) or np.any(weights <= 0):
            raise NonpositiveWeight("partition weights must be positive, one per part")
        labels.setflags(write=False)
        return cls(
            p=int(p),
            parts=parts,
            weights=weights,
            signatures=tuple((k,) for k in range(len(parts))),
            degree=_frozen(np.ones(len(parts)), np.int64),
            labels=labels,
        )

    def with_weights(self, weights) -> "InducedPartition":
        weights = _frozen(weights, np.float64)
        if weights.shape != (self.n_parts,) or np.any(weights <= 0):
            raise NonpositiveWeight("partition weights must be positive, one per part")
        return InducedPartition(self.p, self.parts, weights, self.signatures, self.degree, self.labels)

    def as_group_structure(self) -> GroupStructure:
        return GroupStructure(self.p, self.parts, self.weights, [f"P{k + 1}" for k in range(self.n_parts)])

    def H(self) -> np.ndarray:
        """Diagonal of ``H = diag(1/h_j)``."""
        return 1.0 / self.degree[self.labels]


def induce_partition(gs: GroupStructure) -> InducedPartition:
    """Build the overlap-induced partition of ``gs``.

    Variables share a part iff they belong to exactly the same set of groups.
    Parts are numbered in order of their smallest member, which is the order a
    left-to-right scan over the columns of the membership matrix produces.
    Each part's weight is the sum of the weights of the groups containing it.

    Examples
    --------
    >>> gs = GroupStructure(3, [[0, 1], [0, 1, 2]], [1.0, 1.0])
    >>> part = induce_partition(gs)
    >>> [P.tolist() for P in part.parts], part.weights.tolist()
    ([[0, 1], [2]], [2.0, 1.0])
    """
    indptr, indices = gs.csr()
    owner = np.repeat(np.arange(gs.m, dtype=np.int64), gs.sizes)
    # stable sort keeps group ids ascending within each variable
    order = np.argsort(indices, kind="stable")
    var_ptr = np.zeros(gs.p + 1, dtype=np.int64)
    np.cumsum(np.bincount(indices, minlength=gs.p), out=var_ptr[1:])
    member_of = owner[order]

    seen = {}
    labels = np.empty(gs.p, dtype=np.int64)
    signatures = []
    for j in range(gs.p):
        sig = tuple(member_of[var_ptr[j]:var_ptr[j + 1]].tolist())
        k = seen.get(sig)
        if k is None:
            k = seen[sig] = len(signatures)
            signatures.append(sig)
        labels[j] = k

    n_parts = len(signatures)
    sort_by_part = np.argsort(labels, kind="stable")
    bounds = np.cumsum(np.bincount(labels, minlength=n_parts))[:-1]
    parts = tuple(_frozen(P, np.int64) for P in np.split(sort_by_part, bounds))
    weights = np.array([gs.weights[list(sig)].sum() for sig in signatures])
    degree = np.array([len(sig) for sig in signatures], dtype=np.int64)
    labels.setflags(write=False)
    return InducedPartition(
        p=gs.p,
        parts=parts,
        weights=_frozen(weights, np.float64),
        signatures=tuple(signatures),
        degree=_frozen(degree, np.int64),
        labels=labels,
    )


def assumption_ratio(gs: GroupStructure, part: Optional[InducedPartition] = None) -> float:
    """``max(#parts, largest part) / max(#groups, largest group)``."""
    if part is None:
        part = induce_partition(gs)
    return max(part.n_parts, part.d_max) / max(gs.m, gs.d_max)


def is_tree_structured(gs: GroupStructure) -> bool:
    """True iff every two groups are either disjoint or nested."""
    M = gs.membership_matrix()
    inter = (M @ M.T).tocoo()
    sizes = gs.sizes
    smaller = np.minimum(sizes[inter.row], sizes[inter.col])
    return bool(np.all(inter.data == smaller))


def tree_order(gs: GroupStructure) -> np.ndarray:
    """Group order with every group after all groups it contains (ascending size)."""
    return np.argsort(gs.sizes, kind="stable")


def random_group_structure(rng: np.random.Generator, p: int, m: int, max_size: Optional[int] = None,
                           weight_range: Sequence[float] = (0.5, 2.0)) -> GroupStructure:
    """Random covering group structure, used by property checks.

    Draws ``m`` random nonempty groups, then adds every uncovered variable to
    a random group so the union is ``[p]``.
    """
    max_size = max_size or p
    groups = []
    for _ in range(m):
        size = int(rng.integers(1, max_size + 1))
        groups.append(set(rng.choice(p, size=size, replace=False).tolist()))
    covered = set().union(*groups)
    for j in range(p):
        if j not in covered:
            groups[int(rng.integers(m))].add(j)
    weights = rng.uniform(*weight_range, size=m)
    return GroupStructure(p, [sorted(G) for G in groups], weights)
