"""Hierarchical log-likelihood of the observed minima and their partitions.

One winter's contribution, restricted to its observed sites, is

    log f(z_i, pi_i | dependence) + sum_j log f'_ij(-y_ij),

with z_ij = f_ij(-y_ij) the station-wise Frechet transform at the GEV
margins and f the joint density of the max-stable vector and its partition.
A support violation anywhere makes the whole value -inf rather than an
error.

All Gaussian CDF factors of one evaluation are grouped by dimension across
the winters and estimated against common shifted Sobol point sets, with
seeds derived deterministically from (evaluation seed, factor kind,
dimension).  Each factor's estimate depends only on its own problem and the
seed, so evaluations are bit-reproducible, invariant under reordering of
the winters, and well-defined for pseudo-marginal bookkeeping.
"""

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import PartitionMismatch
from .exponent import (
    BrModel,
    _block_closed_form,
    seed_key,
)
from .gaussian import StableVariogram, default_anchor
from .margins import GevField, frechet_and_logjac
from .mvn import mvn_cdf_batch

_MODEL_CACHE_MAX = 8

_TAG_V = 11
_TAG_BLOCK = 13


@dataclass(frozen=True)
class ParameterState:
    """Full parameter state: margins plus dependence."""

    field: GevField
    variogram: StableVariogram


class LikelihoodEvaluator:
    """Evaluates the joint log-likelihood over a dataset.

    Caches one dependence model per (range, smoothness) pair so that margin
    and latent-effect updates reuse all matrix workspaces.  Pure given
    (state, partitions, eval_seed).
    """

    def __init__(self, data: Dataset, anchor=None, n_samples=1000, n_shifts=10,
                 reorder=True, sweep_n_samples=None):
        self.data = data
        self.anchor = default_anchor(data.sites) if anchor is None else np.asarray(anchor)
        self.n_samples = n_samples
        self.n_shifts = n_shifts
        self.reorder = reorder
        self.sweep_n_samples = sweep_n_samples or n_samples
        self._models = OrderedDict()
        self._obs = [data.observed_sites(i) for i in range(data.n_years)]

    def _model(self, variogram: StableVariogram, n_samples) -> BrModel:
        key = (variogram.lam, variogram.kappa, n_samples)
        model = self._models.get(key)
        if model is None:
            model = BrModel(
                variogram, self.data.sites, anchor=self.anchor,
                n_samples=n_samples, n_shifts=self.n_shifts,
                reorder=self.reorder,
            )
            self._models[key] = model
            if len(self._models) > _MODEL_CACHE_MAX:
                self._models.popitem(last=False)
        else:
            self._models.move_to_end(key)
        return model

    def model_for(self, variogram: StableVariogram) -> BrModel:
        return self._model(variogram, self.n_samples)

    def sweep_model_for(self, variogram: StableVariogram) -> BrModel:
        """Model with the (possibly lighter) partition-sweep budget."""
        return self._model(variogram, self.sweep_n_samples)

    def frechet_year(self, year_index, field: GevField):
        """(z, log-Jacobian sum, ok) for one winter's observed sites."""
        obs = list(self._obs[year_index])
        y = self.data.minima[year_index, obs]
        t = self.data.t[year_index, obs]
        mu = field.U[obs] + field.alpha * t
        z, log_jac, ok = frechet_and_logjac(-y, mu, field.sigma, field.xi)
        if not np.all(ok):
            return None, -math.inf, False
        return z, float(np.sum(log_jac)), True

    def year_loglik(self, year_index, pi, state: ParameterState, eval_seed=0):
        """(log-likelihood, MC std error) of one winter given its partition."""
        year_id = self.data.years[year_index]
        return self._loglik([year_index], {year_id: pi}, state, eval_seed)

    def total_loglik(self, partitions, state: ParameterState, eval_seed=0):
        """(log-likelihood, MC std error) summed over all winters.

        partitions maps winter id -> SetPartition over that winter's
        observed sites.  -inf for any winter makes the total -inf.
        """
        return self._loglik(range(self.data.n_years), partitions, state, eval_seed)

    def _loglik(self, year_indices, partitions, state, eval_seed):
        """Batched evaluation over the given winters.

        Exact pieces (Jacobians, closed-form factors, single-site winters)
        accumulate directly; every Gaussian CDF factor joins a per-dimension
        batch, evaluated under a seed derived from (eval_seed, kind, dim).
        The standard error comes from per-shift totals, which keeps the
        shared-point-set correlations between factors honest.
        """
        model = self.model_for(state.variogram)
        exact = 0.0
        v_rows = {}       # dim -> [(uppers, cov, weights)]
        blk_rows = {}     # dim -> [(const, upper, cov)]
        for yi in year_indices:
            obs = self._obs[yi]
            year_id = self.data.years[yi]
            pi = partitions[year_id]
            if set(pi.ground) != set(obs):
                raise PartitionMismatch(
                    f"winter {year_id}: partition ground {pi.ground} does not "
                    f"match observed sites {obs}"
                )
            z, log_jac, ok = self.frechet_year(yi, state.field)
            if not ok:
                return -math.inf, 0.0
            exact += log_jac
            ws = model.workspace(obs)
            x = np.log(z)
            n = len(obs)
            if n == 1:
                exact += -1.0 / z[0] - 2.0 * x[0]
                continue
            covs, gvecs = ws.v_pieces()
            uppers = np.empty((n, n - 1))
            for j in range(n):
                others = np.concatenate([np.arange(j), np.arange(j + 1, n)]).astype(int)
                uppers[j] = x[others] - x[j] + gvecs[j]
            v_rows.setdefault(n - 1, []).append((uppers, covs, np.exp(-x)))
            pos = {g: i for i, g in enumerate(obs)}
            for blk in pi.blocks:
                local = tuple(sorted(pos[b] for b in blk))
                const, upper, cov = _block_closed_form(ws, local, x)
                exact += const
                if upper is not None:
                    blk_rows.setdefault(len(upper), []).append((upper, cov))

        n_shifts = model.n_shifts
        shift_totals = np.zeros(n_shifts)
        total = exact
        for dim, rows in sorted(v_rows.items()):
            uppers = np.concatenate([r[0] for r in rows], axis=0)
            covs = np.concatenate([np.asarray(r[1]) for r in rows], axis=0)
            values, shift_means = mvn_cdf_batch(
                uppers, covs, n_samples=model.n_samples,
                seed=seed_key(eval_seed, _TAG_V, dim), n_shifts=n_shifts,
                reorder=model.reorder,
            )
            at = 0
            for _, _, weights in rows:
                k = len(weights)
                total -= float(weights @ values[at:at + k])
                shift_totals -= weights @ shift_means[at:at + k]
                at += k
        for dim, rows in sorted(blk_rows.items()):
            uppers = np.stack([r[0] for r in rows])
            covs = np.stack([r[1] for r in rows])
            values, shift_means = mvn_cdf_batch(
                uppers, covs, n_samples=model.n_samples,
                seed=seed_key(eval_seed, _TAG_BLOCK, dim), n_shifts=n_shifts,
                reorder=model.reorder,
            )
            if np.any(values <= 0.0):
                return -math.inf, 0.0
            total += float(np.sum(np.log(values)))
            with np.errstate(divide="ignore"):
                shift_totals += np.sum(np.log(np.maximum(shift_means, 1e-300)), axis=0)
        if not v_rows and not blk_rows:
            return total, 0.0
        se = float(shift_totals.std(ddof=1) / math.sqrt(n_shifts))
        return total, se


def year_loglik(year_index, pi, state: ParameterState, data: Dataset, eval_seed=0,
                **eval_options):
    """One winter's log-likelihood; see LikelihoodEvaluator.year_loglik."""
    return LikelihoodEvaluator(data, **eval_options).year_loglik(
        year_index, pi, state, eval_seed
    )


def total_loglik(partitions, state: ParameterState, data: Dataset, eval_seed=0,
                 **eval_options):
    """Whole-dataset log-likelihood; see LikelihoodEvaluator.total_loglik."""
    return LikelihoodEvaluator(data, **eval_options).total_loglik(
        partitions, state, eval_seed
    )
