import numpy as np
import pytest

from brownresnick import Dataset, GevField, SiteSet, StableVariogram
from brownresnick.likelihood import ParameterState
from brownresnick.simulation import gev_transform_minima, simulate_simple_br


@pytest.fixture
def sites3():
    return SiteSet.from_coords([[0.0, 0.0], [120.0, 40.0], [300.0, 220.0]])


@pytest.fixture
def sites5():
    rng = np.random.default_rng(17)
    return SiteSet.from_coords(rng.uniform(0.0, 450.0, (5, 2)))


def make_synthetic_dataset(n_years=30, n_sites=4, seed=0, lam=300.0, kappa=1.0,
                           sigma=3.5, xi=-0.1, alpha=-0.06, tau2=1.0, delta=200.0,
                           box=500.0, missing_rate=0.0, return_truth=False,
                           start_year=1970, unit_covariates=False):
    """Winter minima simulated from the full hierarchical model.

    Also returns the true event partitions recorded by the exact sampler
    when return_truth is set.  unit_covariates rescales the coordinate
    columns of X to [0, 1] (useful when a test needs well-conditioned
    trend-surface mixing).
    """
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, box, (n_sites, 2))
    sites = SiteSet.from_coords(coords)
    X = np.column_stack([
        np.ones(n_sites), coords / box if unit_covariates else coords,
        rng.normal(0.0, 1.0, (n_sites, 4)),
    ])
    beta = np.concatenate([
        [35.0],
        rng.normal(0.0, 10.0 if unit_covariates else 0.02, 2),
        rng.normal(0.0, 0.3, 4),
    ])
    dist = sites.distance_matrix()
    corr = np.exp(-dist / delta)
    U = X @ beta + np.linalg.cholesky(tau2 * corr + 1e-10 * np.eye(n_sites)) \
        @ rng.standard_normal(n_sites)

    years = tuple(range(start_year, start_year + n_years))
    vario = StableVariogram(lam, kappa)
    draws, parts = simulate_simple_br(sites, vario, seed=[seed, 999],
                                      n_draws=n_years, return_partitions=True)
    occ_day = rng.integers(1, 120, (n_years, n_sites))
    t = np.empty((n_years, n_sites))
    for yi, year in enumerate(years):
        t[yi] = (year - 2000) + (occ_day[yi] - 31.0) / 365.25
    mu = U[None, :] + alpha * t
    minima = gev_transform_minima(draws, mu, sigma, xi)

    if missing_rate > 0:
        mask = rng.uniform(size=minima.shape) < missing_rate
        for yi in range(n_years):
            if mask[yi].all():
                mask[yi, rng.integers(n_sites)] = False
        for j in range(n_sites):
            if mask[:, j].all():
                mask[rng.integers(n_years), j] = False
        minima = np.where(mask, np.nan, minima)
        t = np.where(mask, np.nan, t)

    occ = tuple(
        tuple((int(occ_day[yi, j]),) if np.isfinite(minima[yi, j]) else ()
              for j in range(n_sites))
        for yi in range(n_years)
    )
    data = Dataset(years, sites, minima, occ, X, t)
    if not return_truth:
        return data
    field = GevField(beta, U, alpha, sigma, xi, tau2, delta, X)
    truth = ParameterState(field, vario)
    partitions = {}
    for yi, year in enumerate(years):
        obs = data.observed_sites(yi)
        blocks = []
        for blk in parts[yi].blocks:
            keep = tuple(b for b in blk if b in obs)
            if keep:
                blocks.append(keep)
        from brownresnick import SetPartition

        partitions[year] = SetPartition(tuple(blocks))
    return data, truth, partitions
