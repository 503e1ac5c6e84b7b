"""Monte Carlo estimation of multivariate normal orthant probabilities.

The estimator is the separation-of-variables scheme: a greedy variable
reordering, a Cholesky factorization in that order, and the sequential
conditioning transform integrated by quasi-Monte Carlo.  Randomization is by
Cranley-Patterson shifts of a fixed Sobol point set, so the estimate is
deterministic given the seed and the standard error comes from the spread of
the per-shift means.

A batched entry point evaluates many problems of the same dimension against
a common shifted point set; the exponent-function and partition-density code
lean on it heavily.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import NotPositiveDefinite
from .mvn_fast import (
    HAVE_NUMBA,
    sov_batch as _sov_batch_compiled,
    sov_batch_ragged as _sov_batch_ragged,
)

_SOBOL_CACHE = {}

# Floors keeping ndtri off the exact endpoints of (0, 1).
_Q_LO = 1e-300
_Q_HI = 1.0 - 1e-16

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class MvnEstimate:
    """A Monte Carlo estimate of Pr(X <= upper)."""

    value: float
    std_error: float
    n_samples: int
    seed: object

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"probability estimate out of [0, 1]: {self.value}")
        if self.std_error < 0:
            raise ValueError("standard error must be nonnegative")


def _sobol_points(dim, n):
    """Unscrambled Sobol points, cached per (dim, n); n is a power of two."""
    key = (dim, n)
    pts = _SOBOL_CACHE.get(key)
    if pts is None:
        pts = qmc.Sobol(dim, scramble=False).random(n)
        _SOBOL_CACHE[key] = pts
    return pts


def _trunc_mean(t, e):
    """E[Z | Z <= t] for standard normal Z, with e = Phi(t) already floored."""
    out = -np.exp(-0.5 * t * t) / (_SQRT_2PI * e)
    return np.where(t > -37.0, out, t)


def _ordered_cholesky_batch(cov, b):
    """Greedy reordered Cholesky, vectorized over a batch of problems.

    At each step the remaining variable with the smallest conditional
    probability is pivoted to the front (Gibson-Glasbey-Elston ordering),
    which concentrates the integrand's variation in the leading Sobol
    coordinates.  cov is (m, d, d), b is (m, d); returns (L, b) reordered
    per problem.
    """
    c = np.array(cov, dtype=float)
    b = np.array(b, dtype=float)
    m, d = b.shape
    lower = np.zeros((m, d, d))
    y = np.zeros((m, d))
    rows = np.arange(m)
    for i in range(d):
        tail = np.arange(i, d)
        s2 = c[:, tail, tail] - np.einsum("mkj,mkj->mk", lower[:, i:, :i], lower[:, i:, :i])
        s2 = np.maximum(s2, 1e-300)
        t = (b[:, i:] - np.einsum("mkj,mj->mk", lower[:, i:, :i], y[:, :i])) / np.sqrt(s2)
        k = i + np.argmin(t, axis=1)
        if np.any(k != i):
            for arr in (c[:, :, :],):
                tmp = arr[rows, i, :].copy()
                arr[rows, i, :] = arr[rows, k, :]
                arr[rows, k, :] = tmp
                tmp = arr[rows, :, i].copy()
                arr[rows, :, i] = arr[rows, :, k]
                arr[rows, :, k] = tmp
            tmp = lower[rows, i, :].copy()
            lower[rows, i, :] = lower[rows, k, :]
            lower[rows, k, :] = tmp
            tmp = b[rows, i].copy()
            b[rows, i] = b[rows, k]
            b[rows, k] = tmp
        pivot = c[:, i, i] - np.einsum("mj,mj->m", lower[:, i, :i], lower[:, i, :i])
        if np.any(pivot <= 0):
            raise NotPositiveDefinite(
                f"covariance matrix is not positive definite (pivot at step {i})"
            )
        lower[:, i, i] = np.sqrt(pivot)
        if i + 1 < d:
            lower[:, i + 1 :, i] = (
                c[:, i + 1 :, i]
                - np.einsum("mkj,mj->mk", lower[:, i + 1 :, :i], lower[:, i, :i])
            ) / lower[:, i, i, None]
        ti = (b[:, i] - np.einsum("mj,mj->m", lower[:, i, :i], y[:, :i])) / lower[:, i, i]
        ei = np.maximum(ndtr(ti), 1e-300)
        y[:, i] = _trunc_mean(ti, ei)
    return lower, b


def _plain_cholesky_batch(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    d = cov.shape[-1]
    jitter = 1e-10 * np.mean(np.diagonal(cov, axis1=-2, axis2=-1))
    try:
        return np.linalg.cholesky(cov + jitter * np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("covariance is not positive definite") from exc


def _sov_integrand_batch(lower, b, u):
    """Sequential-conditioning integrand for m problems on n cube points.

    lower is (m, d, d), b is (m, d), u is (n, d-1); returns (m, n).
    Dispatches to the compiled kernel when numba is installed.
    """
    if HAVE_NUMBA:
        return _sov_batch_compiled(
            np.ascontiguousarray(lower), np.ascontiguousarray(b),
            np.ascontiguousarray(u),
        )
    m, d = b.shape
    n = u.shape[0]
    e_prev = np.broadcast_to(ndtr(b[:, 0] / lower[:, 0, 0])[:, None], (m, n)).copy()
    f = e_prev.copy()
    if d == 1:
        return f
    y = np.empty((m, n, d - 1))
    for i in range(1, d):
        q = np.clip(u[None, :, i - 1] * e_prev, _Q_LO, _Q_HI)
        y[:, :, i - 1] = ndtri(q)
        ci = (b[:, i, None] - np.einsum("mnj,mj->mn", y[:, :, :i], lower[:, i, :i])) / lower[
            :, i, i, None
        ]
        e_prev = ndtr(ci)
        f *= e_prev
    return f


def _resolve_budget(n_samples, n_shifts):
    n_shifts = max(2, int(n_shifts))
    n_per = max(1, int(np.ceil(n_samples / n_shifts)))
    n_per = 1 << int(np.ceil(np.log2(n_per)))
    return n_shifts, n_per


def mvn_cdf_batch(uppers, covs, n_samples=1000, seed=0, n_shifts=10, reorder=True):
    """Estimate Pr(X_k <= uppers[k]) for m problems of equal dimension.

    All problems share one shifted Sobol point set (common random numbers),
    so linear combinations of the estimates can propagate their Monte Carlo
    error through the returned per-shift means.

    Returns (values, shift_means) with shapes (m,) and (m, n_shifts).
    Uppers must be finite; callers handle infinite limits by dropping or
    zeroing coordinates beforehand.
    """
    uppers = np.atleast_2d(np.asarray(uppers, dtype=float))
    covs = np.asarray(covs, dtype=float)
    if covs.ndim == 2:
        covs = covs[None, :, :]
    m, d = uppers.shape
    n_shifts, n_per = _resolve_budget(n_samples, n_shifts)
    if d == 1:
        vals = ndtr(uppers[:, 0] / np.sqrt(covs[:, 0, 0]))
        return vals, np.repeat(vals[:, None], n_shifts, axis=1)
    if reorder:
        try:
            lower, b = _ordered_cholesky_batch(covs, uppers)
        except NotPositiveDefinite:
            jitter = 1e-10 * np.mean(np.diagonal(covs, axis1=-2, axis2=-1))
            lower, b = _ordered_cholesky_batch(covs + jitter * np.eye(d), uppers)
    else:
        lower = _plain_cholesky_batch(covs)
        b = uppers

    pts = _sobol_points(d - 1, n_per)
    rng = np.random.default_rng(seed)
    shifts = rng.random((n_shifts, d - 1))
    u = pts[None, :, :] + shifts[:, None, :]
    u -= np.floor(u)
    f = _sov_integrand_batch(lower, b, u.reshape(n_shifts * n_per, d - 1))
    shift_means = f.reshape(m, n_shifts, n_per).mean(axis=2)
    values = np.clip(shift_means.mean(axis=1), 0.0, 1.0)
    return values, shift_means


def mvn_cdf_batch_ragged(uppers, covs, n_samples=1000, seed=0, n_shifts=10):
    """Estimates for problems of mixed dimensions against one point set.

    uppers and covs are sequences whose entries may differ in length; no
    variable reordering is applied.  Returns the value array only (the
    partition-sweep weights this serves need no standard errors).  Falls
    back to per-problem evaluation without numba.
    """
    m = len(uppers)
    dims = np.array([len(u) for u in uppers], dtype=np.int64)
    n_shifts, n_per = _resolve_budget(n_samples, n_shifts)
    if not HAVE_NUMBA:
        values = np.empty(m)
        for i in range(m):
            values[i] = mvn_cdf(
                uppers[i], None, covs[i], n_samples=n_samples,
                seed=seed_key_local(seed, i), n_shifts=n_shifts, reorder=False,
            ).value
        return values
    dmax = int(dims.max())
    b = np.zeros((m, dmax))
    c = np.zeros((m, dmax, dmax))
    for i in range(m):
        d = dims[i]
        b[i, :d] = uppers[i]
        c[i, :d, :d] = covs[i]
    pts = _sobol_points(max(dmax - 1, 1), n_per)
    rng = np.random.default_rng(seed)
    shifts = rng.random((n_shifts, max(dmax - 1, 1)))
    u = pts[None, :, :] + shifts[:, None, :]
    u -= np.floor(u)
    f = _sov_batch_ragged(c, b, dims, u.reshape(n_shifts * n_per, -1))
    return np.clip(f.reshape(m, n_shifts * n_per).mean(axis=1), 0.0, 1.0)


def seed_key_local(seed, *extra):
    if isinstance(seed, (list, tuple, np.ndarray)):
        return [int(s) for s in seed] + [int(e) for e in extra]
    return [int(seed)] + [int(e) for e in extra]


def mvn_cdf(upper, mean=None, cov=None, n_samples=1000, seed=0, n_shifts=10,
            reorder=True):
    """Estimate Pr(X <= upper) for X ~ N(mean, cov).

    Coordinates with upper = +inf are dropped (exact marginalization); any
    -inf gives probability zero exactly.  Dimensions 0 and 1 are closed
    form.  Otherwise the Sobol point count per shift is rounded up to a
    power of two, so the reported n_samples may exceed the request.

    Returns an MvnEstimate; deterministic given the seed.
    """
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = len(upper)
    if mean is None:
        mean = np.zeros(d)
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (d,))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (d, d):
        raise ValueError(f"covariance shape {cov.shape} does not match dimension {d}")

    b = upper - mean
    if np.any(np.isneginf(b)):
        return MvnEstimate(0.0, 0.0, 0, seed)
    keep = ~np.isposinf(b)
    if not np.all(keep):
        b = b[keep]
        cov = cov[np.ix_(keep, keep)]
        d = len(b)
    if d == 0:
        return MvnEstimate(1.0, 0.0, 0, seed)
    if d == 1:
        if cov[0, 0] <= 0:
            raise NotPositiveDefinite("scalar variance must be positive")
        return MvnEstimate(float(ndtr(b[0] / np.sqrt(cov[0, 0]))), 0.0, 0, seed)

    n_shifts, n_per = _resolve_budget(n_samples, n_shifts)
    values, shift_means = mvn_cdf_batch(
        b[None, :], cov[None, :, :], n_samples=n_samples, seed=seed,
        n_shifts=n_shifts, reorder=reorder,
    )
    std_error = float(shift_means[0].std(ddof=1) / np.sqrt(n_shifts))
    return MvnEstimate(float(values[0]), std_error, n_shifts * n_per, seed)
