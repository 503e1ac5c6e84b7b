"""Space-time single-linkage declustering of winter-minimum occurrence days.

Two sites fall in the same cluster when their (tie-resolved) occurrence
days differ by at most the time lag, optionally also requiring the sites to
be closer than a distance cap; clusters are the connected components of the
resulting link graph (friend-to-friend).  Day indices count from 1 = Dec 1
inside each winter window (December through March).
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDays
from .gaussian import SiteSet
from .partitions import SetPartition

DEFAULT_LAG_DAYS = 5


@dataclass(frozen=True)
class OccurrenceRecord:
    """Occurrence days of one site's winter minimum in one winter."""

    year: int
    site: int
    days: tuple
    minimum: float = float("nan")

    def __post_init__(self):
        days = tuple(int(d) for d in self.days)
        if not days:
            raise EmptyDays(f"no occurrence days for site {self.site}, winter {self.year}")
        object.__setattr__(self, "days", days)


def resolve_ties(rec: OccurrenceRecord, seed):
    """Pick one occurrence day uniformly at random; deterministic given seed."""
    if len(rec.days) == 1:
        return rec.days[0]
    rng = np.random.default_rng(seed)
    return int(rec.days[rng.integers(len(rec.days))])


def decluster_year(days, sites: SiteSet = None, lag=DEFAULT_LAG_DAYS,
                   max_distance=None):
    """Partition one winter's observed sites by single linkage.

    days maps site index -> resolved occurrence day.  Sites i, j are linked
    when |day_i - day_j| <= lag and, if max_distance is given, when
    dist(s_i, s_j) < max_distance (so stations at least max_distance apart
    land in different clusters).  The partition is the set of connected
    components.
    """
    if lag < 0:
        raise ValueError("lag must be nonnegative")
    if max_distance is not None and sites is None:
        raise ValueError("a SiteSet is required when max_distance is set")
    idx = sorted(int(i) for i in days)
    parent = {i: i for i in idx}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_pos, i in enumerate(idx):
        for j in idx[a_pos + 1 :]:
            if abs(days[i] - days[j]) > lag:
                continue
            if max_distance is not None:
                dist = float(np.linalg.norm(sites.coords[i] - sites.coords[j]))
                if dist >= max_distance:
                    continue
            parent[find(i)] = find(j)
    groups = {}
    for i in idx:
        groups.setdefault(find(i), []).append(i)
    return SetPartition(tuple(tuple(g) for g in groups.values()))


def decluster_dataset(data, lag=DEFAULT_LAG_DAYS, max_distance=None, seed=0):
    """Fixed per-year partitions for a whole dataset.

    Ties in the occurrence days are resolved uniformly at random with
    draws keyed by (seed, year position, site), so the result is
    reproducible.  Returns {winter id: SetPartition over observed sites}.
    """
    out = {}
    for yi, year in enumerate(data.years):
        days = {}
        for j in range(data.sites.n_sites):
            if not np.isfinite(data.minima[yi, j]):
                continue
            day_list = data.occ_days[yi][j]
            if not day_list:
                raise EmptyDays(
                    f"winter {year}, site {data.sites.ids[j]}: observed minimum "
                    "without occurrence days"
                )
            rec = OccurrenceRecord(year, j, day_list, data.minima[yi, j])
            days[j] = resolve_ties(rec, seed=[int(seed), yi, j])
        out[year] = decluster_year(days, data.sites, lag=lag, max_distance=max_distance)
    return out


def save_partitions(partitions, path):
    """Write {winter: SetPartition} as CSV rows winter,partition (1-based)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["winter", "partition"])
        for year in sorted(partitions):
            writer.writerow([year, partitions[year].serialize()])


def load_partitions(path):
    """Inverse of save_partitions."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["winter", "partition"]:
            raise ValueError(f"{path}: expected header 'winter,partition'")
        for row in reader:
            if not row:
                continue
            out[int(row[0])] = SetPartition.parse(row[1])
    return out
