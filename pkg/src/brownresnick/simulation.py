"""Exact simulation of the max-stable process and posterior prediction maps.

The sampler builds the process site by site through its extremal functions:
for each site k an independent unit-rate Poisson sequence of levels 1/zeta
is thinned against the current maximum, and candidate spectral functions
normalized at s_k (Y(s_k) = 1, E[Y(s_j)] = 1) are accepted only when they
do not exceed the already-final maxima at earlier sites.  The output law is
exact, with unit Frechet margins; the generating function of each site's
maximum is tracked, so a draw can also report its true event partition.

Random draws are keyed per (seed, site, trial), so enlarging the site set
by appending sites never changes the draw at the original sites.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .errors import ShapeTooLarge
from .gaussian import SiteSet, StableVariogram, build_covariance, cholesky_factor
from .margins import XI_EPS, GevField
from .partitions import SetPartition

_TAG_LEVELS = 101
_TAG_NORMALS = 103


class BrSimulator:
    """Reusable exact sampler on a fixed site set.

    Precomputes, for every site k, the Cholesky factor of the process
    increments anchored at s_k; each candidate spectral function then costs
    one Gaussian draw.
    """

    def __init__(self, sites: SiteSet, variogram: StableVariogram):
        self.sites = sites
        self.variogram = variogram
        coords = sites.coords
        d = sites.n_sites
        diff = coords[:, None, :] - coords[None, :, :]
        self.gamma_pair = variogram.gamma_dist(np.linalg.norm(diff, axis=-1))
        self._chols = []
        for k in range(d):
            others = [j for j in range(d) if j != k]
            if not others:
                self._chols.append(None)
                continue
            cov = build_covariance(sites.subset(others), variogram, coords[k])
            self._chols.append(cholesky_factor(cov))

    def draw(self, seed, return_partition=False):
        """One exact draw (length-D unit-Frechet vector).

        With return_partition=True also returns the SetPartition grouping
        sites whose maxima share a generating spectral function.
        """
        d = self.sites.n_sites
        z = np.zeros(d)
        owner = np.full(d, -1, dtype=int)
        fid = 0
        y = np.empty(d)
        for k in range(d):
            levels = np.random.default_rng(
                _key(seed, k, _TAG_LEVELS)
            )
            zeta = levels.standard_exponential()
            trial = 0
            others = np.concatenate([np.arange(k), np.arange(k + 1, d)]).astype(int)
            gamma_k = self.gamma_pair[others, k]
            chol = self._chols[k]
            while 1.0 / zeta > z[k]:
                normals = np.random.default_rng(
                    _key(seed, k, _TAG_NORMALS, trial)
                ).standard_normal(d - 1) if d > 1 else None
                y[k] = 1.0
                if d > 1:
                    y[others] = np.exp(chol @ normals - gamma_k)
                cand = y / zeta
                if k == 0 or np.all(cand[:k] < z[:k]):
                    taken = cand > z
                    z = np.maximum(z, cand)
                    owner[taken] = fid
                fid += 1
                zeta += levels.standard_exponential()
                trial += 1
        if not return_partition:
            return z
        groups = {}
        for j, f in enumerate(owner):
            groups.setdefault(f, []).append(j)
        pi = SetPartition(tuple(tuple(g) for g in groups.values()))
        return z, pi


def _key(seed, *extra):
    if isinstance(seed, (list, tuple, np.ndarray)):
        parts = [int(s) for s in seed]
    else:
        parts = [int(seed)]
    parts.extend(int(e) for e in extra)
    return parts


def simulate_simple_br(sites: SiteSet, v: StableVariogram, seed, n_draws=None,
                       return_partitions=False):
    """Exact draws of the simple max-stable process at the sites.

    Returns a (D,) vector for n_draws=None, else an (n_draws, D) array;
    with return_partitions=True the true event partitions come along.
    """
    sim = BrSimulator(sites, v)
    if n_draws is None:
        return sim.draw(seed, return_partition=return_partitions)
    out = np.empty((n_draws, sites.n_sites))
    parts = []
    for i in range(n_draws):
        if return_partitions:
            out[i], pi = sim.draw(_key(seed, i), return_partition=True)
            parts.append(pi)
        else:
            out[i] = sim.draw(_key(seed, i))
    return (out, parts) if return_partitions else out


# ---------------------------------------------------------------------------
# grids and kriging


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid clipped to the convex hull of the stations."""

    points: np.ndarray      # (M, 2) cell centers, inside the hull only
    resolution: float
    shape: tuple            # (nx, ny) of the enclosing rectangle

    @classmethod
    def from_sites(cls, sites: SiteSet, resolution):
        if resolution <= 0:
            raise ValueError("grid resolution must be positive")
        coords = sites.coords
        lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        xs = np.arange(lo[0], hi[0] + resolution / 2, resolution)
        ys = np.arange(lo[1], hi[1] + resolution / 2, resolution)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        if len(coords) >= 3:
            try:
                hull = Delaunay(coords)
                inside = hull.find_simplex(pts) >= 0
            except Exception:
                inside = np.ones(len(pts), dtype=bool)
        else:
            inside = np.ones(len(pts), dtype=bool)
        if not np.any(inside):
            inside = np.ones(len(pts), dtype=bool)
        return cls(pts[inside], float(resolution), (len(xs), len(ys)))

    @property
    def n_cells(self):
        return len(self.points)

    def as_sites(self):
        return SiteSet.from_coords(self.points, [f"g{i}" for i in range(self.n_cells)])


def interpolate_covariates(X_stations, station_coords, grid_points, power=2.0):
    """Inverse-distance interpolation of station covariates onto a grid.

    The intercept and coordinate columns are exact; remaining columns are
    IDW averages of the station values.
    """
    X_stations = np.asarray(X_stations, dtype=float)
    grid_points = np.asarray(grid_points, dtype=float)
    m = len(grid_points)
    out = np.empty((m, X_stations.shape[1]))
    out[:, 0] = 1.0
    out[:, 1:3] = grid_points
    dist = np.linalg.norm(
        grid_points[:, None, :] - np.asarray(station_coords)[None, :, :], axis=-1
    )
    w = 1.0 / np.maximum(dist, 1e-6) ** power
    w /= w.sum(axis=1, keepdims=True)
    out[:, 3:] = w @ X_stations[:, 3:]
    return out


def krige_random_effect(U, beta, tau2, delta, station_coords, X_stations,
                        grid_points, X_grid):
    """Posterior-mean latent location surface at grid points.

    Conditional Gaussian mean given U at the stations, with mean surface
    X beta and covariance tau2 * exp(-||h||/delta); tau2 cancels from the
    mean but is kept in the signature for the field's full description.
    Reproduces U exactly at the station locations.
    """
    U = np.asarray(U, dtype=float)
    beta = np.asarray(beta, dtype=float)
    station_coords = np.asarray(station_coords, dtype=float)
    grid_points = np.asarray(grid_points, dtype=float)
    d_ss = np.linalg.norm(
        station_coords[:, None, :] - station_coords[None, :, :], axis=-1
    )
    d_gs = np.linalg.norm(grid_points[:, None, :] - station_coords[None, :, :], axis=-1)
    r_ss = np.exp(-d_ss / delta)
    c_gs = np.exp(-d_gs / delta)
    chol = cholesky_factor(r_ss)
    resid = U - np.asarray(X_stations, dtype=float) @ beta
    from scipy.linalg import cho_solve

    weights = cho_solve((chol, True), resid)
    return np.asarray(X_grid, dtype=float) @ beta + c_gs @ weights


def krige_field(field: GevField, station_coords, grid: GridSpec, X_grid=None):
    """Convenience wrapper kriging a GevField's latent effects to a grid."""
    if X_grid is None:
        X_grid = interpolate_covariates(field.X, station_coords, grid.points)
    return krige_random_effect(
        field.U, field.beta, field.tau2, field.delta, station_coords, field.X,
        grid.points, X_grid,
    )


# ---------------------------------------------------------------------------
# temperature fields and group predictive draws


def gev_transform_minima(z, mu, sigma, xi):
    """Map unit-Frechet draws to minimum temperatures under the margins.

    The negated minima are mu + sigma (z^xi - 1)/xi (log z at xi = 0); the
    returned values are minima in degrees C.
    """
    z = np.asarray(z, dtype=float)
    if abs(xi) < XI_EPS:
        negated = mu + sigma * np.log(z)
    else:
        negated = mu + sigma * (z**xi - 1.0) / xi
    return -negated


def simulate_temperature_field(grid: GridSpec, field: GevField, dep: StableVariogram,
                               t, seed, station_coords=None, X_grid=None,
                               mu_grid=None, simulator: BrSimulator = None):
    """One simulated field of winter minima (degrees C) over the grid.

    The latent location surface is kriged from the field's station effects
    (or supplied directly as mu_grid), shifted by the trend alpha * t; the
    dependence comes from one exact draw on the grid cells.  Pass a
    prebuilt simulator to amortize its factorizations across draws.
    """
    if mu_grid is None:
        if station_coords is None:
            raise ValueError("station_coords are required to krige the location surface")
        mu_grid = krige_field(field, station_coords, grid, X_grid)
    if simulator is None:
        simulator = BrSimulator(grid.as_sites(), dep)
    z = simulator.draw(seed)
    return gev_transform_minima(z, mu_grid + field.alpha * t, field.sigma, field.xi)


def exceedance_map(grid: GridSpec, field: GevField, t, threshold=-36.0,
                   station_coords=None, X_grid=None, mu_grid=None):
    """Pr(winter minimum > threshold) per grid cell for year offset t."""
    from .margins import GevParams, gev_cdf

    if field.xi >= 1:
        raise ShapeTooLarge("exceedance map undefined for shape >= 1")
    if mu_grid is None:
        if station_coords is None:
            raise ValueError("station_coords are required to krige the location surface")
        mu_grid = krige_field(field, station_coords, grid, X_grid)
    mu_t = mu_grid + field.alpha * t
    return np.array([
        gev_cdf(GevParams(m, field.sigma, field.xi), -threshold) for m in mu_t
    ])


def mean_map(grid: GridSpec, field: GevField, t, station_coords=None, X_grid=None,
             mu_grid=None):
    """Mean winter minimum (degrees C) per grid cell for year offset t."""
    from scipy.special import gamma as gamma_fn

    if field.xi >= 1:
        raise ShapeTooLarge("GEV mean undefined for shape >= 1")
    if mu_grid is None:
        if station_coords is None:
            raise ValueError("station_coords are required to krige the location surface")
        mu_grid = krige_field(field, station_coords, grid, X_grid)
    mu_t = mu_grid + field.alpha * t
    if abs(field.xi) < XI_EPS:
        shift = field.sigma * 0.5772156649015329
    else:
        shift = field.sigma * (gamma_fn(1.0 - field.xi) - 1.0) / field.xi
    return -(mu_t + shift)


def group_extreme_predictive(stations, field: GevField, dep: StableVariogram,
                             n_sims, seed, t=0.0, stat="max",
                             station_coords=None, simulator=None):
    """Predictive draws of a group statistic of winter minima.

    stations is a nonempty list of station indices; the statistic is the
    max, min or mean over the group of one simulated winter's minima at
    those stations, replicated n_sims times at year offset t.
    """
    stations = [int(j) for j in stations]
    if not stations:
        raise ValueError("the station group must be nonempty")
    reducer = {"max": np.max, "min": np.min, "mean": np.mean}[stat]
    if simulator is None:
        if station_coords is None:
            raise ValueError("station_coords (full set) are required")
        coords = np.asarray(station_coords)[stations]
        simulator = BrSimulator(
            SiteSet.from_coords(coords, [f"g{j}" for j in stations]), dep
        )
    mu = field.U[stations] + field.alpha * t
    out = np.empty(n_sims)
    for i in range(n_sims):
        z = simulator.draw(_key(seed, i))
        y = gev_transform_minima(z, mu, field.sigma, field.xi)
        out[i] = reducer(y)
    return out


def save_grid(path, grid: GridSpec, values):
    """Write (x km, y km, value) rows for external plotting."""
    values = np.asarray(values, dtype=float)
    with open(path, "w") as fh:
        fh.write("x_km,y_km,value\n")
        for (x, y), v in zip(grid.points, values):
            fh.write(f"{x:.3f},{y:.3f},{float(v)!r}\n")
