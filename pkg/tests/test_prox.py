import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepgl.exceptions import MaxSweepsExceeded, NegativeLambda
from sepgl.groups import GroupStructure, InducedPartition, induce_partition, random_group_structure
from sepgl.penalties import phi
from sepgl.prox import (
    BCDWorkspace,
    dual_objective,
    prox_certificate,
    prox_overlapping_bcd,
    prox_separable,
    prox_soft_threshold,
)
from sepgl.simgen import nested_groups


def grid_minimize(f, lo, hi, steps=(0.1, 0.01, 0.001)):
    """Coarse-to-fine grid search; each level scans +-10 cells of the previous level."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    center = None
    for k, h in enumerate(steps):
        if center is None:
            axes = [np.arange(a, b + h / 2, h) for a, b in zip(lo, hi)]
        else:
            prev = steps[k - 1]
            axes = [c + h * np.arange(-int(round(10 * prev / h)), int(round(10 * prev / h)) + 1) for c in center]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
        vals = f(mesh)
        i = int(np.argmin(vals))
        center = mesh[i]
        best = float(vals[i])
    return center, best


def prox_objective_batch(B, mu, lam, gs):
    vals = 0.5 * np.sum((B - mu) ** 2, axis=1)
    for G, w in zip(gs.groups, gs.weights):
        vals += lam * w * np.linalg.norm(B[:, G], axis=1)
    return vals


def test_prox_separable_examples():
    part = InducedPartition.from_parts(2, [[0, 1]], [1.0])
    mu = np.array([3.0, 4.0])
    assert np.array_equal(prox_separable(mu, 0.0, part), mu)
    assert np.array_equal(prox_separable(mu, 5.0, part), [0.0, 0.0])
    assert prox_separable(mu, 1.0, part) == pytest.approx([2.4, 3.2], abs=1e-15)


def test_prox_separable_matches_grid():
    part = InducedPartition.from_parts(2, [[0, 1]], [1.0])
    mu = np.array([3.0, 4.0])
    gs = GroupStructure(2, [[0, 1]], [1.0])
    x, _ = grid_minimize(lambda B: prox_objective_batch(B, mu, 1.0, gs), [0, 0], [3, 4])
    assert x == pytest.approx(prox_separable(mu, 1.0, part), abs=1e-3)


def test_soft_threshold_examples():
    assert prox_soft_threshold([2.0, -2.0], 1.0, [1.0, 3.0]).tolist() == [1.0, 0.0]
    mu = np.array([0.3, -1.2, 4.0])
    assert np.array_equal(prox_soft_threshold(mu, 0.0, [1, 1, 1]), mu)


def test_soft_threshold_equals_singleton_separable(rng):
    for _ in range(50):
        p = 7
        mu = rng.standard_normal(p) * 3
        c = rng.uniform(0.1, 2.0, p)
        lam = rng.uniform(0, 2)
        part = InducedPartition.from_parts(p, [[j] for j in range(p)], c)
        assert np.allclose(prox_soft_threshold(mu, lam, c), prox_separable(mu, lam, part), atol=1e-15, rtol=0)


def test_negative_lambda(three_d):
    part = induce_partition(three_d)
    with pytest.raises(NegativeLambda):
        prox_separable([1, 2, 3], -0.1, part)
    with pytest.raises(NegativeLambda):
        prox_soft_threshold([1.0], -1, [1.0])
    with pytest.raises(NegativeLambda):
        prox_overlapping_bcd([1, 2, 3], -1, three_d)


def test_separable_zero_blocks_exact(rng):
    gs = random_group_structure(rng, 20, 6)
    part = induce_partition(gs)
    mu = rng.standard_normal(20)
    lam = 0.8
    beta = prox_separable(mu, lam, part)
    for P, w in zip(part.parts, part.weights):
        if np.linalg.norm(mu[P]) <= lam * w:
            assert np.all(beta[P] == 0.0)
            assert not np.any(np.signbit(beta[P]))
        else:
            assert np.all(beta[P] != 0.0)


def test_bcd_disjoint_equals_closed_form(rng):
    for _ in range(20):
        p = int(rng.integers(2, 15))
        labels = rng.integers(0, 4, p)
        groups = [np.flatnonzero(labels == k) for k in np.unique(labels)]
        w = rng.uniform(0.5, 2, len(groups))
        gs = GroupStructure(p, groups, w)
        mu = rng.standard_normal(p) * 2
        lam = rng.uniform(0, 1.5)
        res = prox_overlapping_bcd(mu, lam, gs)
        expected = prox_separable(mu, lam, InducedPartition.from_parts(p, groups, w))
        assert np.max(np.abs(res.beta - expected)) <= 1e-10
        assert res.iterations <= 2


def test_bcd_single_group_block_threshold(rng):
    gs = GroupStructure(5, [list(range(5))], [1.7])
    mu = rng.standard_normal(5) * 3
    res = prox_overlapping_bcd(mu, 0.9, gs)
    scale = max(0.0, 1 - 0.9 * 1.7 / np.linalg.norm(mu))
    assert res.beta == pytest.approx(scale * mu, abs=1e-12)


def test_bcd_three_d_grid_oracle(three_d):
    rng = np.random.default_rng(2024)
    for _ in range(3):
        mu = rng.standard_normal(3) * 2
        res = prox_overlapping_bcd(mu, 0.7, three_d)
        bcd_obj = 0.5 * np.sum((res.beta - mu) ** 2) + 0.7 * phi(res.beta, three_d)
        r = np.abs(mu).max()
        _, grid_obj = grid_minimize(lambda B: prox_objective_batch(B, mu, 0.7, three_d), [-r] * 3, [r] * 3)
        assert bcd_obj <= grid_obj + 1e-5


def test_bcd_tree_one_sweep_exact(rng):
    gs = nested_groups(4, 2)
    for _ in range(10):
        mu = rng.standard_normal(gs.p) * 2
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MaxSweepsExceeded)
            one = prox_overlapping_bcd(mu, 0.4, gs, max_sweeps=1, tol=1e-300)
        full = prox_overlapping_bcd(mu, 0.4, gs, order="index")
        assert np.max(np.abs(one.beta - full.beta)) <= 1e-9
        assert prox_certificate(one, mu, 0.4, gs).ok


def test_certificate_on_tightly_converged_runs():
    rng = np.random.default_rng(11)
    for _ in range(40):
        p = int(rng.integers(2, 25))
        gs = random_group_structure(rng, p, int(rng.integers(1, 8)))
        mu = rng.standard_normal(p) * 2
        lam = rng.uniform(0.01, 1.5)
        res = prox_overlapping_bcd(mu, lam, gs, tol=1e-13, max_sweeps=100_000)
        assert res.converged
        cert = prox_certificate(res, mu, lam, gs, tol=1e-8)
        assert cert.ok, cert
        for xi, G, w in zip(res.duals, gs.groups, gs.weights):
            assert np.linalg.norm(xi) <= lam * w + 1e-12
            off = np.ones(p, bool)
            off[G] = False
            assert np.all(xi[off] == 0)


def test_certificate_lambda_zero(three_d):
    mu = np.array([1.0, -2.0, 3.0])
    res = prox_overlapping_bcd(mu, 0.0, three_d)
    assert np.array_equal(res.beta, mu)
    assert all(np.all(xi == 0) for xi in res.duals)
    cert = prox_certificate(res, mu, 0.0, three_d)
    assert (cert.dual_infeasibility, cert.linking, cert.alignment) == (0.0, 0.0, 0.0)


def test_snap_clears_jointly_zeroed_groups():
    # beta = 0 here is reached only through several groups at once
    rng = np.random.default_rng(11)
    for _ in range(47):
        p = int(rng.integers(2, 25))
        gs = random_group_structure(rng, p, int(rng.integers(1, 8)))
        mu = rng.standard_normal(p) * 2
        lam = rng.uniform(0.01, 1.5)
    res = prox_overlapping_bcd(mu, lam, gs, tol=1e-10)
    assert res.converged
    assert np.all(res.beta == 0.0)
    assert prox_certificate(res, mu, lam, gs).ok


def test_truncated_run_reports_residual():
    gs = GroupStructure(4, [[0, 1, 2], [1, 2, 3], [0, 3]], [1, 1, 1])
    mu = np.array([2.0, -1.0, 1.5, 0.7])
    with pytest.warns(MaxSweepsExceeded):
        res = prox_overlapping_bcd(mu, 0.3, gs, max_sweeps=1)
    assert not res.converged
    cert = prox_certificate(res, mu, 0.3, gs)
    assert cert.alignment > 0


def test_dual_objective_monotone():
    rng = np.random.default_rng(5)
    for _ in range(10):
        gs = random_group_structure(rng, 12, 5)
        mu = rng.standard_normal(12) * 2
        lam = 0.5
        ws = BCDWorkspace(gs, order="index", warm_duals=True)
        ws.reset()
        prev = 0.5 * mu @ mu
        for _ in range(30):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                beta, _, _ = ws.run(mu, lam, tol=1e-300, max_sweeps=1)
            s = np.zeros(12)
            np.add.at(s, ws.indices, ws.xi)
            val = 0.5 * float((mu - s) @ (mu - s))
            assert val <= prev + 1e-12
            prev = val


def test_dual_objective_function(three_d):
    mu = np.array([1.0, 2.0, 3.0])
    duals = [np.array([0.5, 0.5, 0.0]), np.array([0.0, 0.5, 1.0])]
    assert dual_objective(mu, duals) == 0.5 * (0.25 + 1.0 + 4.0)


@st.composite
def prox_case(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 12))
    gs = random_group_structure(rng, p, int(rng.integers(1, 5)))
    return gs, rng.standard_normal(p) * 2, rng.standard_normal(p) * 2, float(rng.uniform(0, 1.5))


@settings(max_examples=60, deadline=None)
@given(prox_case())
def test_nonexpansive(case):
    gs, m1, m2, lam = case
    part = induce_partition(gs)
    d = np.linalg.norm(m1 - m2)
    b1 = prox_overlapping_bcd(m1, lam, gs).beta
    b2 = prox_overlapping_bcd(m2, lam, gs).beta
    assert np.linalg.norm(b1 - b2) <= d + 1e-8
    s1, s2 = prox_separable(m1, lam, part), prox_separable(m2, lam, part)
    assert np.linalg.norm(s1 - s2) <= d * (1 + 1e-12) + 1e-14
    c = np.ones(gs.p)
    t1, t2 = prox_soft_threshold(m1, lam, c), prox_soft_threshold(m2, lam, c)
    assert np.linalg.norm(t1 - t2) <= d * (1 + 1e-12) + 1e-14


@settings(max_examples=60, deadline=None)
@given(prox_case(), st.floats(0.1, 10))
def test_scaling(case, alpha):
    gs, mu, _, lam = case
    part = induce_partition(gs)
    a = prox_separable(alpha * mu, alpha * lam, part)
    assert np.allclose(a, alpha * prox_separable(mu, lam, part), rtol=1e-12, atol=1e-12)
    b = prox_overlapping_bcd(alpha * mu, alpha * lam, gs).beta
    assert np.allclose(b, alpha * prox_overlapping_bcd(mu, lam, gs).beta, atol=1e-7 * (1 + alpha))


def test_order_validation(three_d):
    with pytest.raises(ValueError):
        BCDWorkspace(three_d, order="bogus")
    with pytest.raises(ValueError):
        prox_overlapping_bcd([1, 2, 3], 0.1, three_d, tol=0)
