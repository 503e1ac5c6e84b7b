"""Set partitions of site indices: structure, enumeration, sampling, metrics.

A partition groups the sites whose componentwise maxima came from the same
generating event.  Partitions are kept in a canonical form (blocks sorted by
smallest element, elements ascending) so equality and hashing behave.

Serialized form: blocks joined by '|', elements comma-separated and written
1-based, e.g. '1,3|2|4,5'.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionTooLarge, GroundMismatch, PartitionMismatch

_ENUM_LIMIT = 10
_COND_LIMIT = 8

_TAG_SWEEP = 29


@dataclass(frozen=True)
class SetPartition:
    """A partition of a finite set of integer indices into disjoint blocks."""

    blocks: tuple
    ground: tuple = None

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.blocks)
        if any(len(b) == 0 for b in blocks):
            raise ValueError("blocks must be nonempty")
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        elements = [i for b in blocks for i in b]
        if len(set(elements)) != len(elements):
            raise ValueError("blocks must be disjoint")
        ground = self.ground
        if ground is None:
            ground = tuple(sorted(elements))
        else:
            ground = tuple(sorted(int(i) for i in ground))
            if set(elements) != set(ground):
                raise ValueError("blocks must cover the ground set exactly")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "ground", ground)

    @classmethod
    def singletons(cls, ground):
        return cls(tuple((int(i),) for i in ground))

    @classmethod
    def one_block(cls, ground):
        return cls((tuple(int(i) for i in ground),))

    @classmethod
    def from_labels(cls, ground, labels):
        """Build from per-element block labels aligned with ground."""
        groups = {}
        for g, lab in zip(ground, labels):
            groups.setdefault(lab, []).append(int(g))
        return cls(tuple(tuple(v) for v in groups.values()))

    @property
    def n_blocks(self):
        return len(self.blocks)

    def block_of(self, index):
        for b in self.blocks:
            if index in b:
                return b
        raise KeyError(f"index {index} not in partition ground set")

    def serialize(self):
        """1-based text form, e.g. '1,3|2|4,5'."""
        return "|".join(",".join(str(i + 1) for i in b) for b in self.blocks)

    @classmethod
    def parse(cls, text):
        """Inverse of serialize: 1-based text back to 0-based indices."""
        blocks = tuple(
            tuple(int(tok) - 1 for tok in part.split(","))
            for part in text.strip().split("|")
        )
        return cls(blocks)


def bell_number(n):
    """Number of set partitions of n elements (via the Bell triangle)."""
    if n == 0:
        return 1
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for val in row:
            nxt.append(nxt[-1] + val)
        row = nxt
    return row[-1]


def enumerate_partitions(ground):
    """All partitions of the ground set, canonical, Bell(|ground|) of them.

    Guarded at 10 elements (Bell(10) = 115975).
    """
    ground = tuple(sorted(int(i) for i in ground))
    n = len(ground)
    if n > _ENUM_LIMIT:
        raise DimensionTooLarge(
            f"partition enumeration is limited to {_ENUM_LIMIT} elements, got {n}"
        )
    if n == 0:
        return []
    out = []
    labels = np.zeros(n, dtype=int)

    def grow(i, n_used):
        if i == n:
            blocks = [[] for _ in range(n_used)]
            for pos, lab in enumerate(labels):
                blocks[lab].append(ground[pos])
            out.append(SetPartition(tuple(tuple(b) for b in blocks)))
            return
        for lab in range(n_used + 1):
            labels[i] = lab
            grow(i + 1, max(n_used, lab + 1))

    grow(0, 0)
    return out


def rand_index(p1: SetPartition, p2: SetPartition):
    """Fraction of index pairs classified the same way by both partitions.

    A pair agrees when it is together in both partitions or separate in
    both.  Returns 1.0 for ground sets with fewer than two elements.
    """
    if p1.ground != p2.ground:
        raise GroundMismatch(
            f"partitions have different ground sets: {p1.ground} vs {p2.ground}"
        )
    ground = p1.ground
    n = len(ground)
    if n < 2:
        return 1.0
    lab1 = {i: k for k, b in enumerate(p1.blocks) for i in b}
    lab2 = {i: k for k, b in enumerate(p2.blocks) for i in b}
    agree = 0
    for a in range(n):
        for b in range(a + 1, n):
            same1 = lab1[ground[a]] == lab1[ground[b]]
            same2 = lab2[ground[a]] == lab2[ground[b]]
            agree += same1 == same2
    return agree / (n * (n - 1) / 2)


def exact_conditional(z, m, seed=0):
    """Conditional distribution of the partition given the observed vector.

    Pr(Pi = pi | Z = z) = f(z, pi) / sum over partitions of f(z, .), with
    every partition's terms estimated under shared Monte Carlo seeds.
    Returns (partitions, probabilities); guarded at 8 sites.

    Probabilities are normalized to sum to one exactly.
    """
    from .exponent import _all_block_logs, _as_frechet, _local_order

    z = _as_frechet(z)
    n = len(z)
    if n > _COND_LIMIT:
        raise DimensionTooLarge(
            f"exact conditional enumeration is limited to {_COND_LIMIT} sites, got {n}"
        )
    ws, x = _local_order(z, m)
    block_logs = _all_block_logs(ws, x, m, seed)
    locals_ = enumerate_partitions(tuple(range(n)))
    log_f = np.array(
        [sum(block_logs[blk] for blk in pi.blocks) for pi in locals_]
    )
    top = log_f.max()
    if not np.isfinite(top):
        raise ValueError("all partition densities estimated to zero")
    probs = np.exp(log_f - top)
    probs /= probs.sum()
    partitions = [
        SetPartition(tuple(tuple(z.indices[i] for i in blk) for blk in pi.blocks))
        for pi in locals_
    ]
    return partitions, probs


def gibbs_sweep(pi: SetPartition, z, m, seed=0):
    """One systematic-random Gibbs sweep over the partition.

    Visits every index in a fresh uniformly shuffled order; each visit
    removes the index, then reassigns it to an existing block of the
    reduced partition or to a new singleton, with probabilities
    proportional to the joint density of the resulting partition.  The
    common exp(-V) factor and all unchanged block terms cancel, so only
    the block terms touching the moved index are evaluated; within one
    sweep every block term is estimated once, in per-size batches under
    seeds shared across the candidates of each move.
    """
    from .exponent import _as_frechet, _local_order, log_neg_partials_batch, seed_key

    z = _as_frechet(z)
    if set(pi.ground) != set(z.indices):
        raise PartitionMismatch(
            f"partition ground {pi.ground} does not match observed indices {z.indices}"
        )
    ws, x = _local_order(z, m)
    pos = {g: i for i, g in enumerate(z.indices)}
    rng = np.random.default_rng(seed_key(seed, _TAG_SWEEP))

    cache = {}

    def ensure(frozensets):
        missing = [fs for fs in frozensets if fs not in cache]
        if missing:
            locals_ = [tuple(sorted(pos[g] for g in fs)) for fs in missing]
            values = log_neg_partials_batch(ws, locals_, x, m, seed)
            for fs, loc in zip(missing, locals_):
                cache[fs] = values[loc]

    blocks = [set(b) for b in pi.blocks]
    order = list(rng.permutation(np.asarray(pi.ground)))
    for j in order:
        j = int(j)
        holder = next(b for b in blocks if j in b)
        holder.discard(j)
        if not holder:
            blocks.remove(holder)
        needed = [frozenset(b | {j}) for b in blocks]
        needed += [frozenset(b) for b in blocks]
        needed.append(frozenset({j}))
        ensure(needed)
        log_w = np.empty(len(blocks) + 1)
        for k, b in enumerate(blocks):
            log_w[k] = cache[frozenset(b | {j})] - cache[frozenset(b)]
        log_w[-1] = cache[frozenset({j})]
        top = log_w.max()
        if top == -math.inf:
            # every candidate's density estimated to zero; keep a singleton
            blocks.append({j})
            continue
        probs = np.exp(log_w - top)
        probs /= probs.sum()
        choice = int(rng.choice(len(log_w), p=probs))
        if choice == len(blocks):
            blocks.append({j})
        else:
            blocks[choice].add(j)
    return SetPartition(tuple(tuple(sorted(b)) for b in blocks))
