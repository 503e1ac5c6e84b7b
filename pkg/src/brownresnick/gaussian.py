"""Variograms, site geometry, covariance construction and Gaussian process sampling.

Everything downstream (exponent functions, likelihoods, exact simulation)
is built on the intrinsically stationary Gaussian process pinned to zero at
an anchor point, whose covariance between two sites is

    Sigma[a, b] = gamma(s_a - anchor) + gamma(s_b - anchor) - gamma(s_a - s_b),

with gamma the semivariogram.  The law of every derived quantity is
anchor-invariant; the anchor only fixes a representation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AnchorCoincident, NotPositiveDefinite

# Anchors closer to a site than this (km) are treated as coincident.
ANCHOR_TOL = 1e-9

# Offset (km) added to the centroid by default_anchor so that the anchor
# cannot sit exactly on a station of a symmetric configuration.
ANCHOR_OFFSET = 1e-6


@dataclass(frozen=True)
class StableVariogram:
    """Stable semivariogram gamma(h) = (||h|| / lam)**kappa.

    lam is the range parameter (km), kappa in (0, 2] the smoothness
    exponent.  The process variogram is 2*gamma.
    """

    lam: float
    kappa: float

    def __post_init__(self):
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise ValueError(f"range parameter must be positive, got {self.lam}")
        if not (0 < self.kappa <= 2):
            raise ValueError(f"smoothness exponent must lie in (0, 2], got {self.kappa}")

    def gamma_dist(self, dist):
        """Semivariogram as a function of distance (km); vectorized."""
        return (np.asarray(dist, dtype=float) / self.lam) ** self.kappa


def semivariogram(h, v: StableVariogram):
    """gamma(h) = (||h||/lam)**kappa for a displacement vector h.

    h may be a single displacement (shape (m,)) or a stack of them
    (shape (n, m)).  Symmetric in h -> -h by construction.
    """
    h = np.atleast_2d(np.asarray(h, dtype=float))
    r = np.linalg.norm(h, axis=-1)
    out = v.gamma_dist(r)
    return float(out[0]) if out.size == 1 else out


@dataclass(frozen=True)
class SiteSet:
    """A finite collection of planar sites (projected km coordinates)."""

    coords: np.ndarray
    ids: tuple

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coordinates must be an (D, 2) array")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "coords", coords)
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != coords.shape[0]:
            raise ValueError("number of ids must match number of coordinates")
        if len(set(ids)) != len(ids):
            raise ValueError("site ids must be unique")
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_coords(cls, coords, ids=None):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if ids is None:
            ids = tuple(f"s{i + 1}" for i in range(coords.shape[0]))
        return cls(coords, tuple(ids))

    @property
    def n_sites(self):
        return self.coords.shape[0]

    def __len__(self):
        return self.n_sites

    def subset(self, indices):
        idx = list(indices)
        return SiteSet(self.coords[idx], tuple(self.ids[i] for i in idx))

    def distance_matrix(self):
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.linalg.norm(diff, axis=-1)

    def centroid(self):
        return self.coords.mean(axis=0)


def default_anchor(sites: SiteSet, offset=ANCHOR_OFFSET):
    """Centroid of the sites plus a fixed small offset in each coordinate."""
    return sites.centroid() + offset


def cholesky_factor(matrix):
    """Lower Cholesky factor with a single jitter retry.

    On a first failure, 1e-10 times the mean diagonal is added to the
    diagonal and the factorization retried once; a second failure raises
    NotPositiveDefinite.
    """
    matrix = np.asarray(matrix, dtype=float)
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * np.mean(np.diag(matrix))
    try:
        return np.linalg.cholesky(matrix + jitter * np.eye(matrix.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            f"Cholesky failed for a {matrix.shape[0]}x{matrix.shape[0]} matrix "
            "even after jitter"
        ) from exc


def build_covariance(sites: SiteSet, v: StableVariogram, anchor):
    """Covariance of the anchored Gaussian process at the sites.

    Sigma[a, b] = gamma(s_a - anchor) + gamma(s_b - anchor) - gamma(s_a - s_b),
    so Sigma[j, j] = 2*gamma(s_j - anchor).  The result is positive definite
    for any anchor not coincident with a site (checked by Cholesky).
    """
    anchor = np.asarray(anchor, dtype=float)
    d_anchor = np.linalg.norm(sites.coords - anchor[None, :], axis=1)
    if np.any(d_anchor < ANCHOR_TOL):
        j = int(np.argmin(d_anchor))
        raise AnchorCoincident(f"anchor coincides with site {sites.ids[j]}")
    g_anchor = v.gamma_dist(d_anchor)
    g_pair = v.gamma_dist(sites.distance_matrix())
    cov = g_anchor[:, None] + g_anchor[None, :] - g_pair
    cholesky_factor(cov)  # positive definiteness contract
    return cov


def sample_gp(sites: SiteSet, v: StableVariogram, anchor, seed, size=None):
    """Draw the anchored Gaussian process at the sites.

    Returns a vector of length D (or an array (size, D)) distributed as
    N(0, Sigma) with Sigma from build_covariance; in law the process is
    pinned to zero at the anchor.  Deterministic given the seed.
    """
    cov = build_covariance(sites, v, anchor)
    chol = cholesky_factor(cov)
    rng = np.random.default_rng(seed)
    if size is None:
        return chol @ rng.standard_normal(sites.n_sites)
    draws = rng.standard_normal((size, sites.n_sites))
    return draws @ chol.T
