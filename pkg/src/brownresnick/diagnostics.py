"""Empirical dependence diagnostics and posterior predictive checks.

The pairwise extremal coefficient is estimated nonparametrically from the
F-madogram: with rank-transformed margins F, nu = E|F(Z_i) - F(Z_j)| / 2
and theta = (1 + 2 nu) / (1 - 2 nu).  Estimates are averaged in distance
bins with bootstrap-over-years intervals.  Predictive checks compare
observed station or group quantiles against parametric simulations from
posterior draws.
"""

import csv
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .gaussian import SiteSet, StableVariogram
from .margins import GevField
from .partitions import SetPartition, rand_index
from .simulation import BrSimulator, gev_transform_minima

THETA_SLACK = 0.1


@dataclass(frozen=True)
class ThetaBin:
    """One distance bin of empirical pairwise extremal coefficients."""

    lo: float
    hi: float
    mid: float
    n_pairs: int
    theta: float
    ci_lo: float
    ci_hi: float
    clamped: bool


def _pair_fmadogram(u1, u2):
    nu = 0.5 * np.mean(np.abs(u1 - u2))
    if nu >= 0.5:
        return np.inf
    return (1.0 + 2.0 * nu) / (1.0 - 2.0 * nu)


def _rank_uniform(values):
    order = np.argsort(np.argsort(values))
    return (order + 1.0) / (len(values) + 1.0)


def empirical_extremal_coefficients(data: Dataset, bins, n_boot=200, seed=0):
    """Binned empirical pairwise extremal coefficients with 95% intervals.

    bins are distance edges in km.  Station pairs contribute the
    F-madogram estimate over their commonly observed winters (ranks are
    taken on the negated minima, i.e. the maxima scale).  Bins that catch
    no pair are dropped with a warning.  Estimates above 2 + 0.1 are
    clamped to 2 and flagged.
    """
    bins = np.asarray(bins, dtype=float)
    if len(bins) < 2:
        raise ValueError("need at least two bin edges")
    d = data.sites.n_sites
    dist = data.sites.distance_matrix()
    mask = data.observed_mask
    neg = -data.minima

    pair_dist = []
    pair_uniforms = []
    for i in range(d):
        for j in range(i + 1, d):
            common = mask[:, i] & mask[:, j]
            if common.sum() < 3:
                continue
            u1 = _rank_uniform(neg[common, i])
            u2 = _rank_uniform(neg[common, j])
            pair_dist.append(dist[i, j])
            pair_uniforms.append((np.flatnonzero(common), u1, u2))
    pair_dist = np.asarray(pair_dist)

    rng = np.random.default_rng(seed)
    out = []
    for b in range(len(bins) - 1):
        sel = np.flatnonzero((pair_dist >= bins[b]) & (pair_dist < bins[b + 1]))
        if len(sel) == 0:
            warnings.warn(
                f"no station pair in distance bin [{bins[b]:.0f}, {bins[b + 1]:.0f}) km"
            )
            continue
        thetas = [_pair_fmadogram(pair_uniforms[k][1], pair_uniforms[k][2]) for k in sel]
        theta = float(np.mean(thetas))
        boot = np.empty(n_boot)
        for r in range(n_boot):
            vals = []
            for k in sel:
                years, u1, u2 = pair_uniforms[k]
                take = rng.integers(len(years), size=len(years))
                vals.append(_pair_fmadogram(_rank_uniform(u1[take]), _rank_uniform(u2[take])))
            boot[r] = np.mean(vals)
        lo, hi = np.quantile(boot, [0.025, 0.975])
        clamped = theta > 2.0 + THETA_SLACK
        out.append(
            ThetaBin(
                lo=float(bins[b]), hi=float(bins[b + 1]),
                mid=float(0.5 * (bins[b] + bins[b + 1])), n_pairs=len(sel),
                theta=min(theta, 2.0) if clamped else theta,
                ci_lo=float(lo), ci_hi=float(hi), clamped=clamped,
            )
        )
    return out


def save_theta_bins(theta_bins, path, variogram: StableVariogram = None):
    """Write the binned estimates (and optionally the model curve)."""
    from .exponent import extremal_coefficient

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["lo_km", "hi_km", "mid_km", "n_pairs", "theta", "ci_lo", "ci_hi", "clamped"]
        if variogram is not None:
            header.append("theta_model")
        writer.writerow(header)
        for tb in theta_bins:
            row = [tb.lo, tb.hi, tb.mid, tb.n_pairs,
                   f"{tb.theta:.4f}", f"{tb.ci_lo:.4f}", f"{tb.ci_hi:.4f}", int(tb.clamped)]
            if variogram is not None:
                row.append(f"{float(extremal_coefficient(variogram, tb.mid)):.4f}")
            writer.writerow(row)


# ---------------------------------------------------------------------------
# posterior access helpers


def field_from_sample(posterior, row_index, data: Dataset):
    """Rebuild the GevField of one posterior draw."""
    cols = posterior.columns
    row = posterior.rows[row_index]

    def get(name):
        return row[cols.index(name)]

    p = data.X.shape[1]
    beta = np.array([get(f"beta_{k}") for k in range(p)])
    U = np.array([get(f"U_{sid}") for sid in data.sites.ids])
    return GevField(beta, U, get("alpha"), get("sigma"), get("xi"),
                    get("tau2"), get("delta"), data.X)


def posterior_mean_field(posterior, data: Dataset):
    cols = posterior.columns
    mean = posterior.rows.mean(axis=0)

    def get(name):
        return mean[cols.index(name)]

    p = data.X.shape[1]
    beta = np.array([get(f"beta_{k}") for k in range(p)])
    U = np.array([get(f"U_{sid}") for sid in data.sites.ids])
    return GevField(beta, U, get("alpha"), get("sigma"), get("xi"),
                    get("tau2"), get("delta"), data.X)


def posterior_mean_variogram(posterior):
    return StableVariogram(posterior.mean("lam"), posterior.mean("kappa"))


# ---------------------------------------------------------------------------
# QQ tables


def station_qq_table(data: Dataset, posterior, station, n_rep=200, seed=0, thin=None):
    """Marginal QQ table for one station.

    Observed minima quantiles against posterior-predictive order-statistic
    quantiles: each replicate simulates the station's winters from one
    thinned posterior draw.  Returns rows
    (prob, observed, predicted_median, lo95, hi95).
    """
    obs_years = np.flatnonzero(data.observed_mask[:, station])
    y_obs = np.sort(data.minima[obs_years, station])
    n = len(y_obs)
    t_vals = data.t[obs_years, station]
    rng = np.random.default_rng(seed)
    n_rows = len(posterior.rows)
    thin = thin or max(1, n_rows // n_rep)
    rows = range(0, n_rows, thin)
    sims = []
    for ri in rows:
        field = field_from_sample(posterior, ri, data)
        mu = field.U[station] + field.alpha * t_vals
        z = 1.0 / (-np.log(rng.uniform(size=n)))
        sims.append(np.sort(gev_transform_minima(z, mu, field.sigma, field.xi)))
    sims = np.asarray(sims)
    med = np.median(sims, axis=0)
    lo = np.quantile(sims, 0.025, axis=0)
    hi = np.quantile(sims, 0.975, axis=0)
    probs = (np.arange(1, n + 1)) / (n + 1.0)
    return np.column_stack([probs, y_obs, med, lo, hi])


def group_qq_table(data: Dataset, posterior, group, stat="max", n_rep=100, seed=0):
    """Group-statistic QQ table (observed winters vs predictive bands).

    For each replicate one posterior draw simulates every winter's minima
    at the group's stations (dependence included), the per-winter group
    statistic is reduced and sorted; bands are pointwise 95% envelopes of
    the sorted replicate curves.
    """
    group = [int(j) for j in group]
    reducer = {"max": np.max, "min": np.min, "mean": np.mean}[stat]
    years_obs = [
        yi for yi in range(data.n_years)
        if all(np.isfinite(data.minima[yi, j]) for j in group)
    ]
    observed = np.sort([
        reducer(data.minima[yi, group]) for yi in years_obs
    ])
    n = len(observed)
    coords = data.sites.coords[group]
    n_rows = len(posterior.rows)
    thin = max(1, n_rows // n_rep)
    sims = []
    sim_cache = {}
    for rep, ri in enumerate(range(0, n_rows, thin)):
        field = field_from_sample(posterior, ri, data)
        vario = StableVariogram(
            posterior.rows[ri, posterior.columns.index("lam")],
            posterior.rows[ri, posterior.columns.index("kappa")],
        )
        key = (vario.lam, vario.kappa)
        if key not in sim_cache:
            sim_cache.clear()
            sim_cache[key] = BrSimulator(
                SiteSet.from_coords(coords, [f"q{j}" for j in group]), vario
            )
        sim = sim_cache[key]
        stats = np.empty(n)
        for yy, yi in enumerate(years_obs):
            z = sim.draw([int(seed), rep, yy])
            mu = field.U[group] + field.alpha * data.t[yi, group]
            stats[yy] = reducer(gev_transform_minima(z, mu, field.sigma, field.xi))
        sims.append(np.sort(stats))
    sims = np.asarray(sims)
    med = np.median(sims, axis=0)
    lo = np.quantile(sims, 0.025, axis=0)
    hi = np.quantile(sims, 0.975, axis=0)
    probs = (np.arange(1, n + 1)) / (n + 1.0)
    return np.column_stack([probs, observed, med, lo, hi])


# ---------------------------------------------------------------------------
# partition diagnostics


def partition_size_table(posterior, data: Dataset):
    """Relative frequency of each partition size per winter.

    Uses the partition samples stored during a random-partition run;
    returns {winter: {size: relative frequency}}.
    """
    counts = {year: {} for year in data.years}
    total = {year: 0 for year in data.years}
    for _, _, year_map in posterior.partition_rows:
        for year, text in year_map.items():
            size = SetPartition.parse(text).n_blocks
            counts[year][size] = counts[year].get(size, 0) + 1
            total[year] += 1
    return {
        year: {size: c / total[year] for size, c in sorted(sizes.items())}
        for year, sizes in counts.items() if total[year]
    }


def rand_index_table(posterior, declustered, data: Dataset):
    """Per-winter mean Rand index between sampled and declustered partitions."""
    sums = {year: 0.0 for year in data.years}
    counts = {year: 0 for year in data.years}
    for _, _, year_map in posterior.partition_rows:
        for year, text in year_map.items():
            if year not in declustered:
                continue
            sums[year] += rand_index(SetPartition.parse(text), declustered[year])
            counts[year] += 1
    return {
        year: sums[year] / counts[year] for year in data.years if counts[year]
    }


# ---------------------------------------------------------------------------
# bundled export


def diagnostics_export(data: Dataset, posterior, out_dir, groups=None,
                       declustered=None, seed=0, n_rep=200):
    """Write the plot-ready diagnostic tables into out_dir.

    Emits per-station marginal QQ tables, per-group statistic QQ tables,
    and, when partition samples and declustered partitions are available,
    the partition-size distribution and Rand-index tables.  Returns the
    list of files written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    for j, sid in enumerate(data.sites.ids):
        table = station_qq_table(data, posterior, j, n_rep=n_rep, seed=seed)
        path = os.path.join(out_dir, f"marginal_qq_{sid}.csv")
        _write_qq(path, table)
        written.append(path)

    for name, group in (groups or {}).items():
        table = group_qq_table(data, posterior, group, n_rep=min(n_rep, 100), seed=seed)
        path = os.path.join(out_dir, f"group_qq_{name}.csv")
        _write_qq(path, table)
        written.append(path)

    if posterior.partition_rows:
        sizes = partition_size_table(posterior, data)
        path = os.path.join(out_dir, "partition_sizes.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["winter", "size", "probability"])
            for year, table in sizes.items():
                for size, prob in table.items():
                    writer.writerow([year, size, f"{prob:.4f}"])
        written.append(path)

    if posterior.partition_rows and declustered:
        table = rand_index_table(posterior, declustered, data)
        path = os.path.join(out_dir, "rand_index.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["winter", "mean_rand_index"])
            for year, ri in table.items():
                writer.writerow([year, f"{ri:.4f}"])
            if table:
                writer.writerow(["overall", f"{np.mean(list(table.values())):.4f}"])
        written.append(path)
    return written


def _write_qq(path, table):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prob", "observed", "predicted", "lo95", "hi95"])
        for row in table:
            writer.writerow([f"{v:.6g}" for v in row])
