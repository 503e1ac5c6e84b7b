import numpy as np
import pytest

from brownresnick import (
    BrModel,
    DimensionTooLarge,
    GroundMismatch,
    SetPartition,
    SiteSet,
    StableVariogram,
    bell_number,
    enumerate_partitions,
    exact_conditional,
    gibbs_sweep,
    rand_index,
)
from oracles import BELL, enumerate_partitions_reference


def test_partition_canonical_form():
    p = SetPartition(((4, 2), (1,), (3, 0)))
    assert p.blocks == ((0, 3), (1,), (2, 4))
    assert p.ground == (0, 1, 2, 3, 4)
    assert p == SetPartition(((0, 3), (2, 4), (1,)))


def test_partition_validation():
    with pytest.raises(ValueError):
        SetPartition(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        SetPartition(((0,), ()))
    with pytest.raises(ValueError):
        SetPartition(((0, 1),), ground=(0, 1, 2))


def test_partition_serialization_roundtrip():
    p = SetPartition(((0, 2), (1,), (3, 4)))
    assert p.serialize() == "1,3|2|4,5"
    assert SetPartition.parse("1,3|2|4,5") == p
    rng = np.random.default_rng(0)
    for _ in range(25):
        labels = rng.integers(0, 3, 6)
        q = SetPartition.from_labels(range(6), labels)
        assert SetPartition.parse(q.serialize()) == q


def test_enumerate_counts_match_bell_numbers():
    assert len(enumerate_partitions([7])) == 1
    assert len(enumerate_partitions(range(3))) == BELL[3] == 5
    for n in range(1, 8):
        assert len(enumerate_partitions(range(n))) == BELL[n]
    assert bell_number(10) == BELL[10] == 115975


def test_enumerate_matches_reference_recursion():
    ours = {p.blocks for p in enumerate_partitions(range(4))}
    ref = {
        tuple(sorted(tuple(sorted(b)) for b in pi))
        for pi in enumerate_partitions_reference(range(4))
    }
    assert ours == ref


def test_enumerate_distinct_and_guarded():
    parts = enumerate_partitions(range(6))
    assert len({p.blocks for p in parts}) == len(parts)
    with pytest.raises(DimensionTooLarge):
        enumerate_partitions(range(11))


def test_rand_index_cases():
    a = SetPartition(((0, 1), (2, 3)))
    assert rand_index(a, a) == 1.0
    singles = SetPartition.singletons(range(4))
    block = SetPartition.one_block(range(4))
    assert rand_index(singles, block) == 0.0
    b = SetPartition(((0, 1, 2), (3,)))
    assert rand_index(a, b) == pytest.approx(0.5)


def test_rand_index_symmetric_and_guarded():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = SetPartition.from_labels(range(5), rng.integers(0, 3, 5))
        q = SetPartition.from_labels(range(5), rng.integers(0, 3, 5))
        assert rand_index(p, q) == rand_index(q, p)
    with pytest.raises(GroundMismatch):
        rand_index(SetPartition.singletons(range(3)), SetPartition.singletons(range(4)))


def pair_model(two_gamma, n_samples=20000):
    dist = (two_gamma / 2.0) * 500.0
    sites = SiteSet.from_coords([[0.0, 0.0], [dist, 0.0]])
    return BrModel(StableVariogram(500.0, 1.0), sites, n_samples=n_samples)


def test_exact_conditional_single_site():
    m = BrModel(StableVariogram(300.0, 1.0), SiteSet.from_coords([[0.0, 0.0]]))
    parts, probs = exact_conditional([1.3], m)
    assert len(parts) == 1 and probs[0] == pytest.approx(1.0)


def test_exact_conditional_normalizes(sites3):
    m = BrModel(StableVariogram(260.0, 1.2), sites3, n_samples=5000)
    parts, probs = exact_conditional([0.8, 1.1, 2.5], m, seed=3)
    assert len(parts) == BELL[3]
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(probs >= 0)


def test_exact_conditional_independence_limit():
    m = pair_model(50.0)
    parts, probs = exact_conditional([1.0, 1.2], m, seed=1)
    table = dict(zip([p.blocks for p in parts], probs))
    assert table[((0,), (1,))] > 0.95


def test_exact_conditional_dependence_limit():
    m = pair_model(1e-4)
    # near-complete dependence favors a single generating event when the
    # values are compatible (equal on the Frechet scale)
    parts, probs = exact_conditional([1.0, 1.0], m, seed=1)
    table = dict(zip([p.blocks for p in parts], probs))
    assert table[((0, 1),)] > 0.95


def test_exact_conditional_dimension_guard():
    rng = np.random.default_rng(2)
    sites = SiteSet.from_coords(rng.uniform(0, 100, (9, 2)))
    m = BrModel(StableVariogram(300.0, 1.0), sites)
    with pytest.raises(DimensionTooLarge):
        exact_conditional(np.ones(9), m)


def test_gibbs_sweep_single_site():
    m = BrModel(StableVariogram(300.0, 1.0), SiteSet.from_coords([[0.0, 0.0]]))
    pi = SetPartition.singletons([0])
    assert gibbs_sweep(pi, [1.5], m, seed=4) == pi


def test_gibbs_sweep_preserves_validity(sites5):
    m = BrModel(StableVariogram(220.0, 1.0), sites5, n_samples=500)
    rng = np.random.default_rng(5)
    z = 1.0 / (-np.log(rng.uniform(size=5)))
    pi = SetPartition.singletons(range(5))
    for sweep in range(25):
        pi = gibbs_sweep(pi, z, m, seed=sweep)
        flat = sorted(i for b in pi.blocks for i in b)
        assert flat == list(range(5))
        assert all(len(b) > 0 for b in pi.blocks)


def test_gibbs_sweep_respects_observed_subset(sites5):
    from brownresnick import FrechetVector, PartitionMismatch

    m = BrModel(StableVariogram(220.0, 1.0), sites5, n_samples=500)
    z = FrechetVector([1.0, 2.0, 0.7], indices=(0, 2, 4))
    pi = SetPartition.singletons((0, 2, 4))
    out = gibbs_sweep(pi, z, m, seed=1)
    assert set(out.ground) == {0, 2, 4}
    with pytest.raises(PartitionMismatch):
        gibbs_sweep(SetPartition.singletons(range(3)), z, m, seed=1)


def test_gibbs_sweep_matches_exact_conditional_small():
    """Short-run check of kernel invariance on 3 sites (the full 4-site,
    1e5-sweep total-variation test is acceptance criterion 4)."""
    rng = np.random.default_rng(6)
    sites = SiteSet.from_coords(rng.uniform(0, 350, (3, 2)))
    m = BrModel(StableVariogram(250.0, 1.0), sites, n_samples=2000)
    z = 1.0 / (-np.log(rng.uniform(size=3)))
    parts, probs = exact_conditional(z, m, seed=0)
    lookup = {p.blocks: k for k, p in enumerate(parts)}
    counts = np.zeros(len(parts))
    start = np.flatnonzero(rng.multinomial(1, probs))[0]
    pi = parts[start]
    n_sweeps = 4000
    for sweep in range(n_sweeps):
        pi = gibbs_sweep(pi, z, m, seed=[7, sweep])
        counts[lookup[pi.blocks]] += 1
    tv = 0.5 * np.abs(counts / n_sweeps - probs).sum()
    assert tv < 0.05
