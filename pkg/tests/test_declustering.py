import os

import numpy as np
import pytest

from brownresnick import (
    EmptyDays,
    OccurrenceRecord,
    SetPartition,
    SiteSet,
    decluster_dataset,
    decluster_year,
    load_partitions,
    resolve_ties,
    save_partitions,
)
from conftest import make_synthetic_dataset


def test_resolve_ties_single_day():
    rec = OccurrenceRecord(1980, 0, (23,), -38.0)
    assert resolve_ties(rec, seed=0) == 23


def test_resolve_ties_uniform_over_days():
    rec = OccurrenceRecord(1980, 0, (10, 12), -38.0)
    picks = [resolve_ties(rec, seed=s) for s in range(10000)]
    share = np.mean([p == 10 for p in picks])
    assert abs(share - 0.5) < 0.02
    assert set(picks) == {10, 12}


def test_resolve_ties_deterministic():
    rec = OccurrenceRecord(1980, 0, (3, 7, 30), -38.0)
    assert resolve_ties(rec, seed=5) == resolve_ties(rec, seed=5)


def test_occurrence_record_requires_days():
    with pytest.raises(EmptyDays):
        OccurrenceRecord(1980, 0, (), -38.0)


def test_single_linkage_chain_example():
    # days 1, 4 and 7 with a 5-day lag: one friend-to-friend cluster
    pi = decluster_year({0: 1, 1: 4, 2: 7}, lag=5)
    assert pi == SetPartition.one_block(range(3))


def test_gap_beyond_lag_splits():
    pi = decluster_year({0: 1, 1: 20}, lag=5)
    assert pi == SetPartition.singletons(range(2))


def test_distance_cap_splits_far_station():
    sites = SiteSet.from_coords([[0.0, 0.0], [40.0, 0.0], [500.0, 0.0]])
    pi = decluster_year({0: 1, 1: 4, 2: 7}, sites, lag=5, max_distance=150.0)
    assert pi == SetPartition(((0, 1), (2,)))


def test_distance_cap_requires_sites():
    with pytest.raises(ValueError):
        decluster_year({0: 1, 1: 2}, lag=5, max_distance=100.0)


def test_lag_monotonicity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        days = {j: int(d) for j, d in enumerate(rng.integers(1, 90, 6))}
        sizes = [decluster_year(days, lag=lag).n_blocks for lag in (0, 2, 5, 10, 90)]
        assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_lag_zero_and_full_span():
    days = {0: 3, 1: 17, 2: 42}
    assert decluster_year(days, lag=0) == SetPartition.singletons(range(3))
    assert decluster_year(days, lag=40) == SetPartition.one_block(range(3))


def test_partition_size_bounded_by_sites():
    rng = np.random.default_rng(4)
    days = {j: int(d) for j, d in enumerate(rng.integers(1, 120, 9))}
    assert decluster_year(days, lag=5).n_blocks <= 9


def test_decluster_dataset_skips_missing_sites():
    data = make_synthetic_dataset(n_years=12, n_sites=5, seed=2, missing_rate=0.25)
    partitions = decluster_dataset(data, lag=5, seed=1)
    for yi, year in enumerate(data.years):
        assert set(partitions[year].ground) == set(data.observed_sites(yi))


def test_partition_file_roundtrip(tmp_path):
    data = make_synthetic_dataset(n_years=8, n_sites=4, seed=3)
    partitions = decluster_dataset(data, lag=5, seed=0)
    path = os.path.join(tmp_path, "partitions.csv")
    save_partitions(partitions, path)
    loaded = load_partitions(path)
    assert loaded == partitions
