"""A small end-to-end Bayesian fit on synthetic winter minima.

Simulates a hierarchical dataset (latent location surface, GEV margins,
max-stable dependence), runs a short random-partition MCMC fit, and prints
the posterior summary next to the generating values.  Scaled down to run
in a few minutes; raise the iteration counts for a serious fit.
"""

import numpy as np

from brownresnick import (
    ChainConfig,
    Dataset,
    GevField,
    PriorSpec,
    SiteSet,
    StableVariogram,
    run_chains,
)
from brownresnick.simulation import gev_transform_minima, simulate_simple_br

rng = np.random.default_rng(5)

# ---- simulate the truth ----------------------------------------------------
D, N = 5, 40
truth = dict(sigma=3.5, xi=-0.10, alpha=-0.06, lam=300.0, kappa=1.0,
             tau2=0.8, delta=200.0)
coords = rng.uniform(0, 500, (D, 2))
sites = SiteSet.from_coords(coords)
X = np.column_stack([np.ones(D), coords / 500.0, rng.normal(0, 1, (D, 4))])
beta = np.concatenate([[35.0], rng.normal(0, 0.5, 6)])
corr = np.exp(-sites.distance_matrix() / truth["delta"])
U = X @ beta + np.linalg.cholesky(truth["tau2"] * corr) @ rng.standard_normal(D)

years = tuple(range(1961, 1961 + N))
z = simulate_simple_br(sites, StableVariogram(truth["lam"], truth["kappa"]),
                       seed=17, n_draws=N)
occ_day = rng.integers(1, 120, (N, D))
t = (np.array(years)[:, None] - 2000) + (occ_day - 31.0) / 365.25
minima = gev_transform_minima(z, U[None, :] + truth["alpha"] * t,
                              truth["sigma"], truth["xi"])
occ = tuple(tuple((int(occ_day[i, j]),) for j in range(D)) for i in range(N))
data = Dataset(years, sites, minima, occ, X, t)
print(f"simulated {N} winters at {D} stations; coldest value "
      f"{minima.min():.1f} C, mildest winter minimum {minima.max():.1f} C")

# ---- fit -------------------------------------------------------------------
config = ChainConfig(
    n_chains=2, n_iter=600, burn_in=200, mode="m3",
    n_samples=128, sweep_n_samples=64, n_shifts=4, mvn_reorder=False,
)
print("\nrunning 2 chains x 600 iterations of the random-partition sampler ...")
post = run_chains(config, data, PriorSpec(), master_seed=99, threads=1)

print("\nposterior summary (generating values in brackets):")
for name in ("alpha", "sigma", "xi", "lam", "kappa"):
    lo, hi = post.ci(name)
    print(f"  {name:6s} mean {post.mean(name):8.3f}  95% CI ({lo:8.3f}, {hi:8.3f})"
          f"   [{truth[name]:g}]")
ucols = [post.columns.index(f"U_{sid}") for sid in sites.ids]
umean = post.rows[:, ucols].mean(axis=1)
print(f"  mean-U mean {umean.mean():8.3f}  95% CI "
      f"({np.quantile(umean, 0.025):8.3f}, {np.quantile(umean, 0.975):8.3f})"
      f"   [{U.mean():.3f}]")
print("\nacceptance rates:",
      ", ".join(f"{k}={v:.2f}" for k, v in sorted(post.acceptance.items())))
print("\n(a production fit would use many more chains and iterations, e.g.")
print(" 50 x 15000 with 5000 burn-in, and threads=<cores>)")
