import numpy as np
import pytest

from sepgl.exceptions import AllZeroTruth, DimensionMismatch, FactorizationFailure, InvalidOverlap
from sepgl.groups import GroupStructure, induce_partition, is_tree_structured, random_group_structure
from sepgl.simgen import (
    SimSpec,
    alt_weights,
    build_covariance,
    gen_beta_star,
    gen_response,
    interlocking_groups,
    nested_groups,
    sample_design,
    simulate,
    substream,
)


def test_interlocking_examples():
    assert interlocking_groups(400, 40, 0.2).p == 12808
    one = interlocking_groups(1, 10, 0.2)
    assert one.m == 1 and one.p == 10
    gs = interlocking_groups(3, 10, 0.2)
    assert [G.tolist() for G in gs.groups] == [list(range(0, 10)), list(range(8, 18)), list(range(16, 26))]
    assert np.allclose(gs.weights, np.sqrt(10))
    for m, d, frac in ((7, 10, 0.2), (5, 40, 0.2), (4, 9, 0.3)):
        o = round(frac * d)
        assert interlocking_groups(m, d, frac).p == m * d - (m - 1) * o


def test_interlocking_invalid_overlap():
    with pytest.raises(InvalidOverlap):
        interlocking_groups(3, 2, 0.2)


def test_nested_examples():
    assert nested_groups(800, 4).p == 3200
    one = nested_groups(1, 4)
    assert one.m == 1 and one.groups[0].tolist() == [0, 1, 2, 3]
    gs = nested_groups(6, 3)
    assert is_tree_structured(gs)
    part = induce_partition(gs)
    assert part.n_parts == 6
    assert np.all(part.sizes == 3)
    assert gs.weights == pytest.approx(1 / (3 * np.arange(1, 7)))


def test_covariance_three_d_template():
    gs = GroupStructure(3, [[0, 1], [0, 1, 2]], [1, 1])
    theta = build_covariance(gs, induce_partition(gs), mode="interlocking")
    template = np.array([[1, 0.6, 0.36], [0.6, 1, 0.36], [0.36, 0.36, 1]])
    # template is PD with min eigenvalue above 0.1, so clamping is inactive
    assert np.linalg.eigvalsh(template).min() > 0.1
    assert np.allclose(theta, template, atol=1e-12)


def test_covariance_disjoint_blocks():
    gs = GroupStructure(5, [[0, 1, 2], [3, 4]])
    theta = build_covariance(gs, induce_partition(gs))
    expected = np.zeros((5, 5))
    expected[:3, :3] = 0.6
    expected[3:, 3:] = 0.6
    np.fill_diagonal(expected, 1.0)
    assert np.allclose(theta, expected, atol=1e-12)


def test_covariance_clamps():
    rng = np.random.default_rng(0)
    for _ in range(20):
        gs = random_group_structure(rng, int(rng.integers(2, 40)), int(rng.integers(1, 8)))
        part = induce_partition(gs)
        for mode in ("interlocking", "nested"):
            theta = build_covariance(gs, part, mode=mode)
            assert np.max(np.abs(theta - theta.T)) <= 1e-12
            assert np.linalg.eigvalsh(theta).min() >= 0.1 - 1e-9
            assert np.all(np.diag(theta) >= 0.1) and np.all(np.diag(theta) <= 1 + gs.p * 0.6)


def test_sample_design():
    rng = substream(3, 0, "design")
    X = sample_design(10_000, np.eye(5), rng)
    assert np.max(np.abs(np.cov(X, rowvar=False) - np.eye(5))) <= 0.1
    assert sample_design(1, np.eye(5), rng).shape == (1, 5)
    a = sample_design(20, np.eye(3), substream(1, 0, "design"))
    b = sample_design(20, np.eye(3), substream(1, 0, "design"))
    assert np.array_equal(a, b)
    with pytest.raises(FactorizationFailure):
        sample_design(3, np.array([[1.0, 2.0], [2.0, 1.0]]), rng)


def test_substreams_independent():
    a = substream(0, 0, "design").standard_normal(5)
    b = substream(0, 1, "design").standard_normal(5)
    c = substream(0, 0, "beta").standard_normal(5)
    d = substream(1, 0, "design").standard_normal(5)
    assert not np.array_equal(a, b) and not np.array_equal(a, c) and not np.array_equal(a, d)


def test_beta_star_examples():
    gs = interlocking_groups(5, 10, 0.2)
    beta = gen_beta_star(gs, 0.0, substream(0, 0, "beta"))
    assert np.all(beta != 0)
    nested = nested_groups(10, 2)
    beta = gen_beta_star(nested, 0.9, substream(0, 0, "beta"), rule="nested")
    assert np.all(beta[:18] == 0) and np.all(beta[18:] != 0)


def test_beta_star_zeroed_union():
    for seed in range(20):
        gs = interlocking_groups(10, 10, 0.2)
        beta = gen_beta_star(gs, 0.5, substream(seed, 0, "beta"))
        zero = set(np.flatnonzero(beta == 0).tolist())
        # the zero set is a union of exactly ceil(0.5 * 10) = 5 groups
        covered = [g for g, G in enumerate(gs.groups) if set(G.tolist()) <= zero]
        union = set().union(*(set(gs.groups[g].tolist()) for g in covered))
        assert union == zero
        assert len(covered) >= 5


def test_beta_star_distribution():
    gs = GroupStructure(20_000, [list(range(20_000))])
    beta = gen_beta_star(gs, 0.0, substream(0, 0, "beta"))
    assert np.mean(np.abs(beta)) == pytest.approx(10, abs=0.1)
    assert np.std(np.abs(beta)) == pytest.approx(4, abs=0.1)
    assert np.mean(beta > 0) == pytest.approx(0.5, abs=0.02)


def test_beta_star_all_zero():
    gs = GroupStructure(4, [[0, 1], [2, 3]])
    with pytest.raises(AllZeroTruth):
        gen_beta_star(gs, 0.9, substream(0, 0, "beta"))


def test_response():
    rng = substream(0, 0, "noise")
    X = np.random.default_rng(0).standard_normal((30, 4))
    b = np.array([1.0, 0, -1, 2])
    assert np.max(np.abs(gen_response(X, b, 1e-20, rng) - X @ b)) <= 1e-8
    Xb = np.random.default_rng(1).standard_normal((10_000, 2))
    y = gen_response(Xb, np.zeros(2), 3.0, substream(0, 0, "noise"))
    assert np.var(y) == pytest.approx(3.0, rel=0.2)
    y2 = gen_response(Xb, np.zeros(2), 3.0, substream(0, 0, "noise"))
    assert np.array_equal(y, y2)
    with pytest.raises(DimensionMismatch):
        gen_response(X, np.zeros(3), 1.0, rng)


def test_alt_weights(three_d):
    part = induce_partition(three_d)
    assert alt_weights(part, "proposed").tolist() == [2.0, 1.0]
    assert alt_weights(part, "uniform").tolist() == [1.0, 1.0]
    assert alt_weights(part, "size", "sqrt") == pytest.approx([np.sqrt(2), 1.0])
    assert alt_weights(part, "size", "inverse") == pytest.approx([0.5, 1.0])


def test_simspec_validation():
    for bad in (dict(overlap_frac=0.5), dict(zero_frac=1.0), dict(sigma2=0), dict(n=0), dict(structure="ring")):
        with pytest.raises(ValueError):
            SimSpec(**bad)
    assert SimSpec(structure="nested").weight_rule == "inverse"


def test_simulate_deterministic():
    spec = SimSpec(m=20, d=10, n=30, seed=9)
    a, b = simulate(spec, 2), simulate(spec, 2)
    for f in ("X", "y", "beta_star", "theta"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    c = simulate(spec, 3)
    assert [G.tolist() for G in c.gs.groups] == [G.tolist() for G in a.gs.groups]
    assert not np.array_equal(a.X, c.X)
    assert a.X.shape == (30, 162)
