import math

import numpy as np
import pytest

from brownresnick import (
    Dataset,
    GevField,
    GevParams,
    LikelihoodEvaluator,
    PartitionMismatch,
    SetPartition,
    SiteSet,
    StableVariogram,
    total_loglik,
    year_loglik,
)
from brownresnick.likelihood import ParameterState
from brownresnick.margins import gev_logpdf
from conftest import make_synthetic_dataset


def one_site_dataset(y=-38.5, t=3.0):
    sites = SiteSet.from_coords([[0.0, 0.0]])
    X = np.ones((1, 1))
    return Dataset((2001,), sites, np.array([[y]]), (((5,),),), X, np.array([[t]]))


def small_state(data, sigma=3.5, xi=-0.1, alpha=-0.05, lam=300.0, kappa=1.0,
                U=None):
    d = data.sites.n_sites
    U = np.full(d, 36.0) if U is None else np.asarray(U, dtype=float)
    field = GevField(np.zeros(data.X.shape[1]), U, alpha, sigma, xi, 1.0, 200.0,
                     data.X)
    return ParameterState(field, StableVariogram(lam, kappa))


def test_single_site_equals_gev_logpdf():
    data = one_site_dataset()
    state = small_state(data)
    pi = SetPartition.singletons([0])
    ll, se = year_loglik(0, pi, state, data, eval_seed=0)
    params = GevParams(state.field.U[0] + state.field.alpha * data.t[0, 0],
                       state.field.sigma, state.field.xi)
    assert ll == pytest.approx(gev_logpdf(params, -data.minima[0, 0]), abs=1e-10)
    assert se == 0.0


def test_two_sites_near_independence_sums_marginals():
    sites = SiteSet.from_coords([[0.0, 0.0], [5000.0, 0.0]])
    X = np.ones((2, 1))
    data = Dataset((2001,), sites, np.array([[-37.0, -39.5]]),
                   (((3,), (40,)),), X, np.array([[1.0, 1.0]]))
    state = small_state(data, lam=10.0, kappa=1.0)  # 2 gamma(5000 km) = 1000
    pi = SetPartition.singletons([0, 1])
    ll, _ = year_loglik(0, pi, state, data, eval_seed=1)
    marginals = sum(
        gev_logpdf(
            GevParams(state.field.U[j] + state.field.alpha, state.field.sigma,
                      state.field.xi),
            -data.minima[0, j],
        )
        for j in range(2)
    )
    assert ll == pytest.approx(marginals, abs=5e-3)


def test_out_of_support_year_is_minus_inf():
    data = one_site_dataset(y=-80.0)   # far below the xi<0 lower endpoint
    state = small_state(data, xi=-0.3)
    ll, se = year_loglik(0, SetPartition.singletons([0]), state, data)
    assert ll == -math.inf and se == 0.0


def test_partition_must_match_observed_sites():
    data = make_synthetic_dataset(n_years=4, n_sites=3, seed=1)
    state = small_state(data)
    with pytest.raises(PartitionMismatch):
        year_loglik(0, SetPartition.singletons([0, 1]), state, data)


def test_total_reduces_to_year_for_single_year():
    data = make_synthetic_dataset(n_years=1, n_sites=3, seed=2)
    state = small_state(data)
    parts = {data.years[0]: SetPartition.singletons(range(3))}
    total, _ = total_loglik(parts, state, data, eval_seed=5)
    single, _ = year_loglik(0, parts[data.years[0]], state, data, eval_seed=5)
    assert total == single


def test_year_order_invariance():
    data = make_synthetic_dataset(n_years=6, n_sites=3, seed=3)
    state = small_state(data)
    parts = {y: SetPartition.singletons(range(3)) for y in data.years}
    base, _ = total_loglik(parts, state, data, eval_seed=9)

    order = [4, 2, 0, 5, 1, 3]
    shuffled = Dataset(
        tuple(data.years[i] for i in order), data.sites, data.minima[order],
        tuple(data.occ_days[i] for i in order), data.X, data.t[order],
    )
    again, _ = total_loglik(parts, state, shuffled, eval_seed=9)
    assert again == pytest.approx(base, rel=1e-12)


def test_total_is_minus_inf_if_any_year_is():
    data = make_synthetic_dataset(n_years=5, n_sites=3, seed=4)
    bad = data.minima.copy()
    bad[2, 0] = -200.0
    data_bad = Dataset(data.years, data.sites, bad, data.occ_days, data.X, data.t)
    state = small_state(data_bad, xi=-0.2)
    parts = {y: SetPartition.singletons(range(3)) for y in data_bad.years}
    ll, _ = total_loglik(parts, state, data_bad)
    assert ll == -math.inf


def test_deterministic_given_seed_and_partition_dependence():
    data = make_synthetic_dataset(n_years=5, n_sites=4, seed=5)
    state = small_state(data, U=np.full(4, 35.5))
    singles = {y: SetPartition.singletons(range(4)) for y in data.years}
    paired = {y: SetPartition(((0, 1), (2, 3))) for y in data.years}
    a1, _ = total_loglik(singles, state, data, eval_seed=7)
    a2, _ = total_loglik(singles, state, data, eval_seed=7)
    b, _ = total_loglik(paired, state, data, eval_seed=7)
    assert a1 == a2
    assert a1 != b


def test_missing_sites_restrict_the_year():
    data = make_synthetic_dataset(n_years=10, n_sites=4, seed=6, missing_rate=0.3)
    state = small_state(data)
    parts = {
        y: SetPartition.singletons(data.observed_sites(i))
        for i, y in enumerate(data.years)
    }
    ll, se = total_loglik(parts, state, data, eval_seed=2)
    assert np.isfinite(ll) and se >= 0.0


def test_grid_search_prefers_truth_neighborhood():
    """Coarse profile of the likelihood around the generating parameters."""
    data, truth, partitions = make_synthetic_dataset(
        n_years=40, n_sites=3, seed=7, lam=300.0, kappa=1.0, sigma=3.0,
        xi=-0.1, alpha=0.0, tau2=0.3, return_truth=True,
    )
    ev = LikelihoodEvaluator(data, n_samples=4000)
    parts = {y: partitions[y] for y in data.years}

    def ll_at(sigma, lam):
        from brownresnick.mcmc import set_params

        state = set_params(truth, sigma=sigma, lam=lam)
        return ev.total_loglik(parts, state, eval_seed=11)[0]

    center = ll_at(3.0, 300.0)
    for sigma in (1.2, 7.0):
        assert ll_at(sigma, 300.0) < center
    for lam in (30.0, 30000.0):
        assert ll_at(3.0, lam) < center


def test_evaluator_reuses_models():
    data = make_synthetic_dataset(n_years=3, n_sites=3, seed=8)
    ev = LikelihoodEvaluator(data, n_samples=500)
    v = StableVariogram(250.0, 1.0)
    assert ev.model_for(v) is ev.model_for(StableVariogram(250.0, 1.0))
    assert ev.model_for(v) is not ev.model_for(StableVariogram(251.0, 1.0))
