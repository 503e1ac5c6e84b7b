"""Exponent function, partial derivatives and joint densities of the process.

For sites s_1..s_D and semivariogram gamma, write gamma_ab = gamma(s_a - s_b)
and let x = log z.  The exponent function is

    V(z) = sum_j z_j^{-1} Phi_{D-1}( x_{-j} - x_j + gamma_{.j} ; 0, Omega_j ),

with Omega_j[a, b] = gamma_aj + gamma_bj - gamma_ab: the Gaussian CDF of the
process increments relative to site j.  The partial derivative of -V with
respect to a block of d coordinates (taken first after permutation) is,
with Sigma the anchored process covariance, W = Sigma_11^{-1},
q = W 1_d, t = 1_d' q, sig_d = diag(Sigma_11), g = x_{1:d} + sig_d / 2,
B = Sigma_21 W, m = 1_{D-d} - B 1_d and m0 = (q'g - 1)/t:

    -V_{1:d}(z) = (prod_{j<=d} z_j)^{-1} (2 pi)^{-(d-1)/2} |Sigma_11|^{-1/2}
                  t^{-1/2} exp{ -(g'Wg - (q'g - 1)^2 / t) / 2 }
                  Phi_{D-d}( x_{2} + sig_2/2 - B g - m0 m ; 0,
                             Sigma_22 - B Sigma_12 + m m' / t ),

obtained by integrating the Poisson intensity of the spectral functions over
the scale variable.  The value is anchor-invariant; only the Gaussian CDFs
are estimated by Monte Carlo, everything else is closed form.

The joint density of a max-stable vector and the partition recording which
spectral function generated each component is

    f(z, pi) = exp{-V(z)} * prod_k { -V_{pi_k}(z) },

and the density of the vector alone is the sum of f(z, pi) over all set
partitions.  All products are accumulated in log space.
"""

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import (
    DimensionTooLarge,
    EmptyBlock,
    PartitionMismatch,
)
from .gaussian import SiteSet, StableVariogram, default_anchor
from .mvn import mvn_cdf, mvn_cdf_batch, mvn_cdf_batch_ragged
from .partitions import SetPartition, enumerate_partitions

_LOG_2PI = math.log(2.0 * math.pi)

# Tags keeping derived RNG streams disjoint across uses of one seed.
_TAG_V = 11
_TAG_BLOCK = 13

_BLOCK_CACHE_MAX = 4096


@dataclass(frozen=True)
class McValue:
    """A scalar Monte Carlo estimate with its standard error."""

    value: float
    std_error: float

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class FrechetVector:
    """Observed values on the unit Frechet scale at a subset of sites."""

    values: np.ndarray
    indices: tuple = None

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if np.any(np.isnan(values)) or np.any(values <= 0):
            raise ValueError("Frechet values must be positive")
        object.__setattr__(self, "values", values)
        if self.indices is None:
            object.__setattr__(self, "indices", tuple(range(len(values))))
        else:
            idx = tuple(int(i) for i in self.indices)
            if len(idx) != len(values) or len(set(idx)) != len(idx):
                raise ValueError("indices must be distinct and match the values")
            object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.values)


def _as_frechet(z, indices=None):
    if isinstance(z, FrechetVector):
        return z
    return FrechetVector(np.asarray(z, dtype=float), indices)


def seed_key(seed, *extra):
    """Flatten a seed (int or sequence of ints) plus extra components."""
    if isinstance(seed, (list, tuple, np.ndarray)):
        parts = [int(s) for s in seed]
    else:
        parts = [int(seed)]
    parts.extend(int(e) for e in extra)
    return parts


@dataclass(frozen=True)
class BrModel:
    """Brown-Resnick dependence model on a fixed site set.

    anchor = None selects the default (site centroid plus a small offset).
    n_samples / n_shifts / reorder configure every internal Gaussian CDF
    estimate.
    """

    variogram: StableVariogram
    sites: SiteSet
    anchor: object = None
    n_samples: int = 1000
    n_shifts: int = 10
    reorder: bool = True
    _workspaces: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.sites.n_sites < 1:
            raise ValueError("at least one site is required")
        anchor = self.anchor
        if anchor is None:
            anchor = default_anchor(self.sites)
        object.__setattr__(self, "anchor", np.asarray(anchor, dtype=float))

    def workspace(self, obs=None):
        if obs is None:
            obs = tuple(range(self.sites.n_sites))
        else:
            obs = tuple(int(i) for i in obs)
        ws = self._workspaces.get(obs)
        if ws is None:
            ws = BrWorkspace(self.variogram, self.sites, self.anchor, obs)
            self._workspaces[obs] = ws
        return ws


class BrWorkspace:
    """z-independent matrices for V and its block partial derivatives.

    Built once per (variogram, observed-site subset) and reused across
    years and Monte Carlo evaluations; nothing here depends on z.
    """

    def __init__(self, variogram, sites, anchor, obs):
        self.obs = obs
        self.n = len(obs)
        coords = sites.coords[list(obs)]
        diff = coords[:, None, :] - coords[None, :, :]
        self.gamma_pair = variogram.gamma_dist(np.linalg.norm(diff, axis=-1))
        g_anchor = variogram.gamma_dist(
            np.linalg.norm(coords - np.asarray(anchor)[None, :], axis=1)
        )
        self.sigma = g_anchor[:, None] + g_anchor[None, :] - self.gamma_pair
        self._v_pieces = None
        self._blocks = OrderedDict()

    def v_pieces(self):
        """Per-site CDF covariances and mean shifts for the exponent sum."""
        if self._v_pieces is None:
            n = self.n
            covs = np.empty((n, n - 1, n - 1))
            gvecs = np.empty((n, n - 1))
            for j in range(n):
                others = [a for a in range(n) if a != j]
                gj = self.gamma_pair[others, j]
                covs[j] = gj[:, None] + gj[None, :] - self.gamma_pair[np.ix_(others, others)]
                gvecs[j] = gj
            self._v_pieces = (covs, gvecs)
        return self._v_pieces

    def block_pieces(self, block):
        """Closed-form pieces of -V_block for a sorted tuple of local indices."""
        pieces = self._blocks.get(block)
        if pieces is not None:
            self._blocks.move_to_end(block)
            return pieces
        rest = tuple(a for a in range(self.n) if a not in set(block))
        b_idx = list(block)
        r_idx = list(rest)
        sig11 = self.sigma[np.ix_(b_idx, b_idx)]
        d = len(b_idx)
        chol11 = np.linalg.cholesky(sig11)
        logdet11 = 2.0 * np.sum(np.log(np.diag(chol11)))
        w = np.linalg.inv(sig11)
        q = w.sum(axis=1)
        t = q.sum()
        sig_d = np.diag(sig11)
        if r_idx:
            sig21 = self.sigma[np.ix_(r_idx, b_idx)]
            sig22 = self.sigma[np.ix_(r_idx, r_idx)]
            bmat = sig21 @ w
            s_cond = sig22 - bmat @ sig21.T
            mvec = 1.0 - bmat.sum(axis=1)
            omega = s_cond + np.outer(mvec, mvec) / t
            sig_r = np.diag(sig22)
        else:
            bmat = mvec = omega = sig_r = None
        pieces = {
            "rest": rest,
            "w": w,
            "q": q,
            "t": t,
            "sig_d": sig_d,
            "logdet11": logdet11,
            "bmat": bmat,
            "mvec": mvec,
            "omega": omega,
            "sig_r": sig_r,
        }
        self._blocks[block] = pieces
        if len(self._blocks) > _BLOCK_CACHE_MAX:
            self._blocks.popitem(last=False)
        return pieces


def _restrict_finite(z: FrechetVector):
    """Drop +inf coordinates (exact marginalization of those sites)."""
    finite = np.isfinite(z.values)
    if np.all(finite):
        return z
    keep = np.flatnonzero(finite)
    return FrechetVector(z.values[keep], tuple(z.indices[i] for i in keep))


def _local_order(z: FrechetVector, model: BrModel):
    """Workspace for the observed subset plus log z in workspace order."""
    ws = model.workspace(z.indices)
    return ws, np.log(z.values)


def _v_estimate(ws, x, model, seed):
    """(value, std_error) of V at log-coordinates x over the workspace sites."""
    n = ws.n
    if n == 1:
        return float(np.exp(-x[0])), 0.0
    covs, gvecs = ws.v_pieces()
    uppers = np.empty((n, n - 1))
    for j in range(n):
        others = np.concatenate([np.arange(j), np.arange(j + 1, n)]).astype(int)
        uppers[j] = x[others] - x[j] + gvecs[j]
    values, shift_means = mvn_cdf_batch(
        uppers, covs, n_samples=model.n_samples,
        seed=seed_key(seed, _TAG_V), n_shifts=model.n_shifts,
        reorder=model.reorder,
    )
    weights = np.exp(-x)
    v_shifts = weights @ shift_means
    value = float(weights @ values)
    se = float(v_shifts.std(ddof=1) / np.sqrt(shift_means.shape[1]))
    return value, se


def _block_closed_form(ws, block, x):
    """Closed-form part of log(-V_block) plus its CDF factor's arguments.

    Returns (const_log, upper, cov); upper and cov are None for a full
    block, whose derivative is entirely closed form.
    """
    if ws.n == 1:
        # -V_{1}(z) = z^{-2}; the generic path would difference O(1/Sigma)
        # terms for the near-degenerate single-site anchor
        return -2.0 * float(x[0]), None, None
    pieces = ws.block_pieces(block)
    b_idx = list(block)
    d = len(b_idx)
    w, q, t = pieces["w"], pieces["q"], pieces["t"]
    g = x[b_idx] + 0.5 * pieces["sig_d"]
    gwg = g @ w @ g
    qg = q @ g
    const = (
        -0.5 * (d - 1) * _LOG_2PI
        - 0.5 * pieces["logdet11"]
        - 0.5 * math.log(t)
        - float(np.sum(x[b_idx]))
        - 0.5 * (gwg - (qg - 1.0) ** 2 / t)
    )
    rest = pieces["rest"]
    if not rest:
        return const, None, None
    m0 = (qg - 1.0) / t
    upper = x[list(rest)] + 0.5 * pieces["sig_r"] - pieces["bmat"] @ g - m0 * pieces["mvec"]
    return const, upper, pieces["omega"]


def _log_neg_partial(ws, block, x, model, seed):
    """(log(-V_block), std error of the log) at log-coordinates x.

    block is a sorted tuple of local workspace indices.  Only the Gaussian
    CDF factor carries Monte Carlo error; a full block (d = D) is exact.
    The CDF seed is derived from the block's site content, so repeated
    evaluations of one block under one seed agree exactly.
    """
    const, upper, cov = _block_closed_form(ws, block, x)
    if upper is None:
        return const, 0.0
    est = mvn_cdf(
        upper, None, cov, n_samples=model.n_samples,
        seed=seed_key(seed, _TAG_BLOCK, *[ws.obs[i] for i in block]),
        n_shifts=model.n_shifts, reorder=model.reorder,
    )
    if est.value <= 0.0:
        return -math.inf, math.inf
    return const + math.log(est.value), est.std_error / est.value


def log_neg_partials_batch(ws, blocks, x, model, seed):
    """log(-V_B) for several blocks at once, without standard errors.

    All CDF factors evaluate together against one shifted point set (mixed
    dimensions, no reordering), which keeps the partition sweeps' many
    small weight evaluations cheap.  Returns
    {block (sorted local tuple): log value}.
    """
    out = {}
    pending = []
    for blk in blocks:
        const, upper, cov = _block_closed_form(ws, blk, x)
        if upper is None:
            out[blk] = const
        else:
            pending.append((blk, const, upper, cov))
    if pending:
        values = mvn_cdf_batch_ragged(
            [p[2] for p in pending], [p[3] for p in pending],
            n_samples=model.n_samples, seed=seed_key(seed, _TAG_BLOCK),
            n_shifts=model.n_shifts,
        )
        for (blk, const, _, _), val in zip(pending, values):
            out[blk] = const + math.log(val) if val > 0.0 else -math.inf
    return out


def exponent_v(z, m: BrModel, seed=0):
    """Exponent function V(z); McValue with the Monte Carlo standard error.

    Coordinates at +inf are marginalized exactly.  Homogeneity
    t * V(t z) = V(z) holds exactly under a shared seed because the CDF
    arguments depend on z only through ratios.
    """
    z = _restrict_finite(_as_frechet(z))
    if len(z) == 0:
        return McValue(0.0, 0.0)
    ws, x = _local_order(z, m)
    value, se = _v_estimate(ws, x, m, seed)
    return McValue(value, se)


def neg_partial_v(z, block, m: BrModel, seed=0):
    """-V_block(z): the partial derivative of -V over the given site indices.

    block contains site indices (into the model's site set) that must be
    observed in z.  Returns an McValue; always positive.
    """
    z = _as_frechet(z)
    block = tuple(sorted(int(b) for b in block))
    if not block:
        raise EmptyBlock("differentiation block must be nonempty")
    if not set(block) <= set(z.indices):
        raise PartitionMismatch(f"block {block} not within observed indices {z.indices}")
    finite = _restrict_finite(z)
    if not set(block) <= set(finite.indices):
        raise ValueError("differentiated coordinates must be finite")
    ws, x = _local_order(finite, m)
    pos = {g: i for i, g in enumerate(finite.indices)}
    local_block = tuple(sorted(pos[b] for b in block))
    log_val, se_log = _log_neg_partial(ws, local_block, x, m, seed)
    if log_val == -math.inf:
        return McValue(0.0, 0.0)
    value = math.exp(log_val)
    return McValue(value, value * se_log)


def _validate_partition(pi: SetPartition, z: FrechetVector):
    if set(pi.ground) != set(z.indices):
        raise PartitionMismatch(
            f"partition ground {pi.ground} does not match observed indices {z.indices}"
        )


def st_log_density(z, pi: SetPartition, m: BrModel, seed=0):
    """log f(z, pi) and the standard error of the log.

    f(z, pi) = exp(-V(z)) prod_k (-V_{pi_k}(z)); the partition must cover
    exactly the observed indices.  Block CDF factors of equal dimension are
    evaluated as one batch under a seed derived from (seed, block size), the
    same derivation the enumeration routines use.
    """
    z = _as_frechet(z)
    _validate_partition(pi, z)
    ws, x = _local_order(z, m)
    pos = {g: i for i, g in enumerate(z.indices)}
    v_val, v_se = _v_estimate(ws, x, m, seed)
    log_f = -v_val
    var_log = v_se**2

    by_size = {}
    for blk in pi.blocks:
        local = tuple(sorted(pos[b] for b in blk))
        by_size.setdefault(len(local), []).append(local)
    for d, blocks in sorted(by_size.items()):
        consts = np.empty(len(blocks))
        uppers = []
        covs = []
        for i, blk in enumerate(blocks):
            const, upper, cov = _block_closed_form(ws, blk, x)
            consts[i] = const
            if upper is not None:
                uppers.append(upper)
                covs.append(cov)
        log_f += float(np.sum(consts))
        if not uppers:
            continue
        values, shift_means = mvn_cdf_batch(
            np.asarray(uppers), np.asarray(covs), n_samples=m.n_samples,
            seed=seed_key(seed, _TAG_BLOCK, d), n_shifts=m.n_shifts,
            reorder=m.reorder,
        )
        if np.any(values <= 0.0):
            return -math.inf, math.inf
        log_f += float(np.sum(np.log(values)))
        ses = shift_means.std(axis=1, ddof=1) / np.sqrt(shift_means.shape[1])
        var_log += float(np.sum((ses / values) ** 2))
    return log_f, math.sqrt(var_log)


def st_joint_density(z, pi: SetPartition, m: BrModel, seed=0):
    """Joint density f(z, pi) of the vector and its event partition."""
    log_f, se_log = st_log_density(z, pi, m, seed)
    if log_f == -math.inf:
        return McValue(0.0, 0.0)
    value = math.exp(log_f)
    return McValue(value, value * se_log)


def _all_block_logs(ws, x, m: BrModel, seed):
    """log(-V_B) for every nonempty subset B of the workspace sites.

    Subsets are grouped by size so the Gaussian CDF factors of equal
    dimension evaluate as one batch against shared shifted points.
    """
    n = ws.n
    out = {}
    full = tuple(range(n))
    by_size = {}
    for code in range(1, 1 << n):
        blk = tuple(i for i in range(n) if code >> i & 1)
        by_size.setdefault(len(blk), []).append(blk)
    for d, blocks in by_size.items():
        if d == n:
            lv, _ = _log_neg_partial(ws, full, x, m, seed)
            out[full] = lv
            continue
        consts = np.empty(len(blocks))
        uppers = np.empty((len(blocks), n - d))
        covs = np.empty((len(blocks), n - d, n - d))
        for i, blk in enumerate(blocks):
            consts[i], uppers[i], covs[i] = _block_closed_form(ws, blk, x)
        values, _ = mvn_cdf_batch(
            uppers, covs, n_samples=m.n_samples,
            seed=seed_key(seed, _TAG_BLOCK, d), n_shifts=m.n_shifts,
            reorder=m.reorder,
        )
        with np.errstate(divide="ignore"):
            logs = consts + np.log(values)
        for blk, lv in zip(blocks, logs):
            out[blk] = float(lv)
    return out


def full_log_density_enum(z, m: BrModel, seed=0):
    """log of the density of z alone: logsumexp of log f(z, pi) over pi."""
    z = _as_frechet(z)
    n = len(z)
    if n > 10:
        raise DimensionTooLarge(
            f"full-density enumeration is limited to 10 sites, got {n}"
        )
    ws, x = _local_order(z, m)
    v_val, _ = _v_estimate(ws, x, m, seed)
    block_logs = _all_block_logs(ws, x, m, seed)
    part_logs = [
        sum(block_logs[blk] for blk in pi) for pi in _iter_local_partitions(n)
    ]
    part_logs = np.asarray(part_logs)
    top = part_logs.max()
    if top == -math.inf:
        return -math.inf
    return float(top + np.log(np.sum(np.exp(part_logs - top)))) - v_val


def _iter_local_partitions(n):
    """Set partitions of range(n) as tuples of sorted tuples."""
    for pi in enumerate_partitions(tuple(range(n))):
        yield pi.blocks


def full_density_enum(z, m: BrModel, seed=0):
    """Density of z alone: the sum of f(z, pi) over every set partition.

    Exact-likelihood oracle; feasible up to 10 sites (Bell(10) = 115975
    partitions, evaluated from at most 1023 distinct block terms).
    """
    return math.exp(full_log_density_enum(z, m, seed))


def extremal_coefficient(m, h):
    """Pairwise extremal coefficient theta(h) = 2 Phi(sqrt(2 gamma(h)) / 2).

    Accepts a BrModel or a StableVariogram; exact (no Monte Carlo), maps
    h = 0 to 1 (complete dependence) and h -> inf to 2 (independence).
    """
    v = m.variogram if isinstance(m, BrModel) else m
    if np.any(np.asarray(h) < 0):
        raise ValueError("distance must be nonnegative")
    two_gamma = 2.0 * v.gamma_dist(h)
    return 2.0 * ndtr(np.sqrt(two_gamma) / 2.0)
