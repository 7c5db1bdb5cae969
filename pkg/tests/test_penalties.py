import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepgl.exceptions import DimensionMismatch, InvalidExponent
from sepgl.groups import GroupStructure, induce_partition, random_group_structure
from sepgl.penalties import (
    GeneralLq,
    OverlappingGroupLasso,
    SeparableGroupLasso,
    WeightedLasso,
    dual_estimate,
    dual_upper_bound,
    lasso_weights,
    lq_norm,
    phi,
    psi,
    sandwich_check,
    weighted_lasso,
)


def test_phi_examples(three_d):
    assert phi([3, 4, 0], three_d) == 10.0
    assert phi([0, 0, 0], three_d) == 0.0
    assert phi([3, 4, 2], three_d) == pytest.approx(5 + math.sqrt(29), rel=1e-14)
    assert phi([3, 4, 2], three_d) == pytest.approx(10.385164807134505, rel=1e-14)


def test_psi_examples(three_d):
    part = induce_partition(three_d)
    assert psi([3, 4, 0], part) == 10.0
    assert psi([0, 0, 2], part) == 2.0
    assert psi([3, 4, 2], part) == 12.0


def test_weighted_lasso_examples(three_d):
    c = lasso_weights(three_d)
    assert c.tolist() == [2.0, 2.0, 1.0]
    assert weighted_lasso([3, 4, 2], c) == 16.0
    assert weighted_lasso([0, 0, 0], c) == 0.0


def test_dimension_mismatch(three_d):
    with pytest.raises(DimensionMismatch):
        phi([1, 2], three_d)
    with pytest.raises(DimensionMismatch):
        psi([1, 2, 3, 4], induce_partition(three_d))
    with pytest.raises(DimensionMismatch):
        weighted_lasso([1, 2], [1, 2, 3])


def test_lq_norm_examples(three_d):
    part = induce_partition(three_d)
    beta = np.array([3.0, 4.0, 2.0])
    assert lq_norm(beta, part.parts, part.weights, 1, 2) == pytest.approx(psi(beta, part), rel=1e-14)
    c = lasso_weights(three_d)
    singles = [[j] for j in range(3)]
    assert lq_norm(beta, singles, c, 1, 1) == pytest.approx(16.0, rel=1e-14)
    assert lq_norm(beta, [[0, 1], [2]], [1, 1], np.inf, 2) == 5.0


def test_lq_norm_rejects_bad_exponent():
    with pytest.raises(InvalidExponent):
        lq_norm([1, 2], [[0, 1]], [1], 0, 2)
    with pytest.raises(InvalidExponent):
        lq_norm([1, 2], [[0, 1]], [1], 1, -1)


def test_lq_norm_brute_force(rng):
    # oracle: explicit loops in plain python
    groups = [[0, 2], [1, 2, 3], [3]]
    w = [0.7, 1.3, 2.0]
    for _ in range(20):
        beta = rng.standard_normal(4)
        for q1 in (0.5, 1.0, 2.0, 3.0):
            for q2 in (0.5, 1.0, 2.0):
                inner = [sum(abs(beta[j]) ** q2 for j in G) ** (1 / q2) for G in groups]
                expected = sum(wg * t ** q1 for wg, t in zip(w, inner)) ** (1 / q1)
                assert lq_norm(beta, groups, w, q1, q2) == pytest.approx(expected, rel=1e-12)
        inner_inf = [max(abs(beta[j]) for j in G) for G in groups]
        assert lq_norm(beta, groups, w, 1, np.inf) == pytest.approx(sum(a * b for a, b in zip(w, inner_inf)))


def test_dual_upper_bound_examples(three_d):
    assert dual_upper_bound([1, 1, 1], three_d) == pytest.approx(math.sqrt(1.5), rel=1e-14)
    gs = GroupStructure(4, [[0, 1], [2, 3]], [1, 1])
    v = np.array([1.0, 2.0, -3.0, 0.5])
    assert dual_upper_bound(v, gs) == pytest.approx(np.linalg.norm(v[2:]), rel=1e-14)


def test_sandwich_examples(three_d):
    part = induce_partition(three_d)
    rep = sandwich_check(three_d, part, [0, 0, 0])
    assert (rep.phi, rep.psi, rep.wlasso, rep.ok) == (0.0, 0.0, 0.0, True)
    rep = sandwich_check(three_d, part, [3, 4, 0])
    assert rep.ok and rep.phi == rep.psi
    rep = sandwich_check(three_d, part, [3, 4, 2])
    assert rep.ok and rep.phi < rep.psi < rep.wlasso


@st.composite
def structure_and_beta(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 31))
    m = int(rng.integers(1, 9))
    gs = random_group_structure(rng, p, m)
    sparsity = draw(st.sampled_from([0.0, 0.5, 0.9]))
    beta = rng.standard_normal(p) * (rng.random(p) >= sparsity)
    return gs, beta


@settings(max_examples=300, deadline=None)
@given(structure_and_beta())
def test_sandwich_property(args):
    gs, beta = args
    rep = sandwich_check(gs, induce_partition(gs), beta)
    assert rep.ok


@settings(max_examples=200, deadline=None)
@given(structure_and_beta(), st.integers(0, 1000))
def test_single_part_equality(args, k):
    gs, beta = args
    part = induce_partition(gs)
    P = part.parts[k % part.n_parts]
    b = np.zeros(gs.p)
    b[P] = beta[P] + 0.1
    assert phi(b, gs) == pytest.approx(psi(b, part), rel=1e-12)


def test_sandwich_vertex_enumeration():
    # vertices of the cube {-1, 0, 1}^p for small p
    import itertools

    rng = np.random.default_rng(7)
    for _ in range(10):
        p = int(rng.integers(2, 7))
        gs = random_group_structure(rng, p, int(rng.integers(1, 5)))
        part = induce_partition(gs)
        for v in itertools.product((-1.0, 0.0, 1.0), repeat=p):
            assert sandwich_check(gs, part, np.array(v)).ok


@settings(max_examples=100, deadline=None)
@given(structure_and_beta(), st.floats(-5, 5))
def test_norm_axioms(args, alpha):
    gs, beta = args
    rng = np.random.default_rng(abs(hash(beta.tobytes())) % 2**32)
    other = rng.standard_normal(gs.p)
    part = induce_partition(gs)
    c = lasso_weights(gs)
    norms = [
        lambda b: phi(b, gs),
        lambda b: psi(b, part),
        lambda b: weighted_lasso(b, c),
        lambda b: lq_norm(b, gs.groups, gs.weights, 2, 1),
        lambda b: lq_norm(b, gs.groups, gs.weights, np.inf, 3),
    ]
    for f in norms:
        assert f(alpha * beta) == pytest.approx(abs(alpha) * f(beta), rel=1e-12, abs=1e-12)
        assert f(beta + other) <= f(beta) + f(other) + 1e-12 * (1 + f(beta) + f(other))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_disjoint_collapse(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 15))
    labels = rng.integers(0, 4, p)
    groups = [np.flatnonzero(labels == k) for k in np.unique(labels)]
    w = rng.uniform(0.5, 2.0, len(groups))
    gs = GroupStructure(p, groups, w)
    part = induce_partition(gs)
    beta = rng.standard_normal(p)
    a = phi(beta, gs)
    assert psi(beta, part) == pytest.approx(a, rel=1e-12)
    assert lq_norm(beta, gs.groups, gs.weights, 1, 2) == pytest.approx(a, rel=1e-12)


def test_penalty_objects_agree(three_d):
    part = induce_partition(three_d)
    beta = np.array([1.0, -2.0, 0.5])
    assert OverlappingGroupLasso(three_d)(beta) == phi(beta, three_d)
    assert SeparableGroupLasso(part)(beta) == psi(beta, part)
    assert SeparableGroupLasso.from_groups(three_d)(beta) == psi(beta, part)
    assert WeightedLasso.from_groups(three_d)(beta) == weighted_lasso(beta, [2, 2, 1])
    assert OverlappingGroupLasso(three_d, scale=2.0)(beta) == 2 * phi(beta, three_d)
    gl = GeneralLq(three_d.groups, three_d.weights, 1, 2, 3)
    assert gl(beta) == pytest.approx(phi(beta, three_d), rel=1e-14)


def test_dual_estimate_lasso(rng):
    for _ in range(5):
        c = rng.uniform(0.5, 2.0, 6)
        v = rng.standard_normal(6)
        est = dual_estimate(v, WeightedLasso(c))
        assert est == pytest.approx(np.max(np.abs(v) / c), abs=1e-6)


def test_dual_estimate_separable(rng):
    for _ in range(5):
        gs = random_group_structure(rng, 8, 3)
        part = induce_partition(gs)
        v = rng.standard_normal(8)
        exact = max(np.linalg.norm(v[P]) / w for P, w in zip(part.parts, part.weights))
        est = dual_estimate(v, SeparableGroupLasso(part))
        assert est == pytest.approx(exact, abs=1e-6)
        assert est <= exact + 1e-10


def test_dual_estimate_sharp_instance():
    # group 0 has no overlaps (h = 1 there) and dominates the bound
    gs = GroupStructure(5, [[0, 1], [1, 2, 3], [3, 4]], [1.0, 1.0, 1.0])
    gs = GroupStructure(6, [[0, 1], [2, 3], [3, 4, 5]], [1.0, 1.0, 1.0])
    v = np.array([3.0, 4.0, 0.1, 0.2, -0.1, 0.3])
    ub = dual_upper_bound(v, gs)
    assert ub == 5.0
    est = dual_estimate(v, OverlappingGroupLasso(gs))
    assert est == pytest.approx(ub, abs=1e-6)
