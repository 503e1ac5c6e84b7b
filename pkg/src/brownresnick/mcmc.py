"""Gibbs-within-Metropolis sampler for the hierarchical model.

Per-iteration kernel order: partition sweeps (random-partition mode only),
conjugate draws of (beta, tau2), random-walk updates of the latent location
effects U, then one random-walk update per configured parameter block.

The likelihood can only be estimated, so the sampler is pseudo-marginal:
the chain stores the log-likelihood estimate accepted last; every proposal
is scored with a fresh evaluation seed; the incumbent's estimate is carried,
never recomputed.  When the partitions change (random-partition mode) the
augmented state has moved, and the retained estimate is refreshed once with
a fresh seed.

Scalar parameters are proposed on transformed scales (log for positive
parameters, a logit map onto finite prior bounds) with Robbins-Monro scale
adaptation during burn-in only.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import ndtr
from scipy.stats import invgamma as invgamma_dist
from scipy.stats import truncnorm

from .data import Dataset
from .errors import ConfigInvalid
from .exponent import FrechetVector, seed_key
from .gaussian import StableVariogram, cholesky_factor
from .likelihood import LikelihoodEvaluator, ParameterState
from .margins import GevField, fit_gev_site
from .partitions import SetPartition, gibbs_sweep

SCALAR_NAMES = ("alpha", "sigma", "xi", "lam", "kappa", "tau2", "delta")
BLOCKABLE = ("alpha", "sigma", "xi", "lam", "kappa", "delta")
ST_PARAMS = {"alpha", "sigma", "xi", "lam", "kappa"}
UPRIOR_PARAMS = {"delta"}
POSITIVE_PARAMS = {"sigma", "lam", "delta", "tau2"}

# model-validity bounds enforced regardless of the priors
HARD_BOUNDS = {
    "kappa": (0.0, 2.0),
    "sigma": (0.0, math.inf),
    "lam": (0.0, math.inf),
    "delta": (0.0, math.inf),
    "tau2": (0.0, math.inf),
}


def _hard_bounds_ok(name, value):
    if name not in HARD_BOUNDS:
        return True
    lo, hi = HARD_BOUNDS[name]
    if name == "kappa":
        return lo < value <= hi
    return lo < value < hi

# Phase tags keeping per-iteration RNG streams disjoint.
_PH_PARTITION = 1
_PH_REFRESH = 2
_PH_U = 3
_PH_BLOCK = 4

_SCALE_MIN, _SCALE_MAX = 1e-4, 50.0


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class ScalarPrior:
    """A univariate prior: uniform, log-uniform or (truncated) normal.

    For 'uniform' and 'loguniform', (a, b) are the support endpoints; for
    'normal', (a, b) are mean and standard deviation and (lo, hi) optional
    truncation bounds.
    """

    kind: str
    a: float
    b: float
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.kind not in ("uniform", "loguniform", "normal"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind in ("uniform", "loguniform"):
            if not self.a < self.b:
                raise ValueError("prior support must have a < b")
            object.__setattr__(self, "lo", self.a)
            object.__setattr__(self, "hi", self.b)
            if self.kind == "loguniform" and self.a <= 0:
                raise ValueError("log-uniform support must be positive")
        if not (self.b > 0 or self.kind != "normal"):
            raise ValueError("normal prior needs a positive sd")

    @property
    def bounds(self):
        return self.lo, self.hi

    def logpdf(self, x):
        if not (self.lo <= x <= self.hi):
            return -math.inf
        if self.kind == "uniform":
            return -math.log(self.b - self.a)
        if self.kind == "loguniform":
            return -math.log(x) - math.log(math.log(self.b / self.a))
        z = (x - self.a) / self.b
        base = -0.5 * z * z - math.log(self.b) - 0.5 * math.log(2 * math.pi)
        if math.isinf(self.lo) and math.isinf(self.hi):
            return base
        aa, bb = (self.lo - self.a) / self.b, (self.hi - self.a) / self.b
        return base - math.log(ndtr(bb) - ndtr(aa))

    def sample(self, rng, size=None):
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=size)
        if self.kind == "loguniform":
            return np.exp(rng.uniform(math.log(self.a), math.log(self.b), size=size))
        if math.isinf(self.lo) and math.isinf(self.hi):
            return rng.normal(self.a, self.b, size=size)
        aa, bb = (self.lo - self.a) / self.b, (self.hi - self.a) / self.b
        return truncnorm.rvs(aa, bb, loc=self.a, scale=self.b, size=size,
                             random_state=rng)


@dataclass(frozen=True)
class PriorSpec:
    """Priors for all model parameters.

    beta has a Gaussian prior with mean beta_mean and precision beta_prec
    (a zero precision matrix is the flat prior); tau2 is inverse-gamma
    (shape, rate); both chosen conjugate.  The remaining scalars carry the
    ScalarPrior fields below.
    """

    beta_mean: np.ndarray = None
    beta_prec: np.ndarray = None
    tau2_shape: float = 2.0
    tau2_rate: float = 1.0
    alpha: ScalarPrior = ScalarPrior("normal", 0.0, 10.0)
    sigma: ScalarPrior = ScalarPrior("loguniform", 1e-2, 1e3)
    xi: ScalarPrior = ScalarPrior("uniform", -0.5, 0.5)
    lam: ScalarPrior = ScalarPrior("loguniform", 1.0, 1e5)
    kappa: ScalarPrior = ScalarPrior("uniform", 1e-6, 2.0)
    delta: ScalarPrior = ScalarPrior("loguniform", 1.0, 1e4)

    def scalar(self, name):
        prior = getattr(self, name, None)
        if not isinstance(prior, ScalarPrior):
            raise KeyError(f"no scalar prior named {name}")
        return prior

    def resolved_beta(self, p):
        mean = np.zeros(p) if self.beta_mean is None else np.asarray(self.beta_mean, float)
        if self.beta_prec is None:
            prec = np.eye(p) / 100.0**2
        else:
            prec = np.atleast_2d(np.asarray(self.beta_prec, float))
        if mean.shape != (p,) or prec.shape != (p, p):
            raise ConfigInvalid("beta prior dimensions do not match the design matrix")
        return mean, prec

    def tau2_logpdf(self, x):
        return float(invgamma_dist.logpdf(x, self.tau2_shape, scale=self.tau2_rate))

    def sample_tau2(self, rng, size=None):
        return self.tau2_rate / rng.gamma(self.tau2_shape, 1.0, size=size)


# ---------------------------------------------------------------------------
# proposal transforms


class _Transform:
    """Bijection between a parameter's support and the real line."""

    def __init__(self, name, prior: ScalarPrior):
        lo, hi = prior.bounds
        if np.isfinite(lo) and np.isfinite(hi):
            self.kind = "logit"
            self.lo, self.hi = lo, hi
        elif name in POSITIVE_PARAMS or (np.isfinite(lo) and lo >= 0):
            self.kind = "log"
        else:
            self.kind = "identity"

    def forward(self, x):
        if self.kind == "log":
            return math.log(x)
        if self.kind == "logit":
            p = (x - self.lo) / (self.hi - self.lo)
            p = min(max(p, 1e-12), 1 - 1e-12)
            return math.log(p / (1 - p))
        return x

    def inverse(self, u):
        if self.kind == "log":
            return math.exp(u)
        if self.kind == "logit":
            return self.lo + (self.hi - self.lo) / (1.0 + math.exp(-u))
        return u

    def log_jacobian(self, x):
        """log |dx/du| at x."""
        if self.kind == "log":
            return math.log(x)
        if self.kind == "logit":
            return (
                math.log(max(x - self.lo, 1e-300))
                + math.log(max(self.hi - x, 1e-300))
                - math.log(self.hi - self.lo)
            )
        return 0.0


def _prior_spread(prior: ScalarPrior, transform: _Transform):
    """Rough scale of the prior on the transformed axis; sizes the base
    proposal step so one adapted scale works for a whole block."""
    if transform.kind == "logit":
        return 1.8     # logit of a uniform is logistic, sd ~ 1.8
    if prior.kind == "loguniform":
        return (math.log(prior.b) - math.log(prior.a)) / math.sqrt(12.0)
    if prior.kind == "uniform":
        return (prior.b - prior.a) / math.sqrt(12.0)
    if transform.kind == "log":
        return 1.0
    return prior.b


# ---------------------------------------------------------------------------
# configuration and chain state


@dataclass(frozen=True)
class ChainConfig:
    """Sampler layout and budgets.

    mode 'm2' keeps the supplied partitions fixed; 'm3' resamples them each
    iteration with Gibbs sweeps.  fixed names parameters held at their
    initial values ('beta', 'tau2', 'U' and any scalar).  u_update is
    'site', 'joint', or an integer block size.
    """

    n_chains: int = 50
    n_iter: int = 15000
    burn_in: int = 5000
    mode: str = "m3"
    blocks: tuple = (("alpha",), ("sigma", "xi"), ("lam", "kappa"), ("delta",))
    scales: dict = field(default_factory=dict)
    u_scale: float = 0.5
    u_update: object = "site"
    partition_sweeps: int = 1
    n_samples: int = 1000
    sweep_n_samples: int = None
    n_shifts: int = 10
    mvn_reorder: bool = True
    u_level_move: bool = True
    adapt: bool = True
    thin: int = 1
    store_partitions_every: int = 10
    likelihood_on: bool = True
    fixed: tuple = ()
    audit: bool = False

    def __post_init__(self):
        if self.mode not in ("m2", "m3"):
            raise ConfigInvalid(f"mode must be 'm2' or 'm3', got {self.mode!r}")
        if not (0 <= self.burn_in < self.n_iter):
            raise ConfigInvalid("burn_in must be smaller than n_iter")
        if self.n_chains < 1 or self.thin < 1:
            raise ConfigInvalid("n_chains and thin must be positive")
        blocks = tuple(tuple(b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        fixed = tuple(self.fixed)
        object.__setattr__(self, "fixed", fixed)
        seen = [p for blk in blocks for p in blk]
        unknown = set(seen) - set(BLOCKABLE)
        if unknown:
            raise ConfigInvalid(f"blocks may only contain {BLOCKABLE}, got {sorted(unknown)}")
        dup = {p for p in seen if seen.count(p) > 1}
        if dup:
            raise ConfigInvalid(f"parameters appear in more than one block: {sorted(dup)}")
        required = set(BLOCKABLE) - set(fixed)
        missing = required - set(seen)
        if missing:
            raise ConfigInvalid(
                f"parameters neither blocked nor fixed: {sorted(missing)}"
            )

    def active_blocks(self):
        out = []
        for blk in self.blocks:
            keep = tuple(p for p in blk if p not in self.fixed)
            if keep:
                out.append(keep)
        return tuple(out)


@dataclass
class ChainState:
    """One chain's mutable state, including pseudo-marginal bookkeeping."""

    state: ParameterState
    partitions: dict
    retained_loglik: float
    retained_se: float
    retained_seed: object
    iteration: int = 0
    chain_key: int = 0
    scales: dict = field(default_factory=dict)
    accepts: dict = field(default_factory=dict)
    audit: list = None

    def log(self, **event):
        if self.audit is not None:
            self.audit.append(dict(iteration=self.iteration, **event))

    def count(self, kernel, accepted):
        acc, tot = self.accepts.get(kernel, (0, 0))
        self.accepts[kernel] = (acc + bool(accepted), tot + 1)

    def acceptance_rates(self):
        return {k: acc / tot for k, (acc, tot) in self.accepts.items() if tot}


def get_param(state: ParameterState, name):
    if name in ("lam", "kappa"):
        return getattr(state.variogram, name)
    return getattr(state.field, name)


def set_params(state: ParameterState, **kw):
    field_kw = {k: v for k, v in kw.items() if k in ("alpha", "sigma", "xi", "tau2", "delta", "U", "beta")}
    gev = replace(state.field, **field_kw) if field_kw else state.field
    if "lam" in kw or "kappa" in kw:
        vario = StableVariogram(kw.get("lam", state.variogram.lam),
                                kw.get("kappa", state.variogram.kappa))
    else:
        vario = state.variogram
    return ParameterState(gev, vario)


def _adapt_scale(chain, key, accepted, target):
    acc, tot = chain.accepts.get(key, (0, 0))
    step = 1.0 / max(tot, 1) ** 0.6
    scale = chain.scales[key] * math.exp(step * ((1.0 if accepted else 0.0) - target))
    chain.scales[key] = min(max(scale, _SCALE_MIN), _SCALE_MAX)


def _gauss_logpdf(resid, chol):
    sol = cho_solve((chol, True), resid)
    return -0.5 * float(resid @ sol) - float(np.sum(np.log(np.diag(chol)))) \
        - 0.5 * len(resid) * math.log(2 * math.pi)


def _corr_chol(dist, delta):
    return cholesky_factor(np.exp(-dist / delta))


# ---------------------------------------------------------------------------
# kernels


def conjugate_updates(chain: ChainState, data: Dataset, priors: PriorSpec,
                      config: ChainConfig, rng, dist=None):
    """Exact Gibbs draws of beta and tau2 from their full conditionals."""
    if dist is None:
        dist = data.sites.distance_matrix()
    st = chain.state.field
    U, X = st.U, st.X
    p = X.shape[1]
    chol_r = _corr_chol(dist, st.delta)
    rinv_x = cho_solve((chol_r, True), X)
    rinv_u = cho_solve((chol_r, True), U)
    beta = st.beta
    if "beta" not in config.fixed:
        m0, p0 = priors.resolved_beta(p)
        prec = p0 + (X.T @ rinv_x) / st.tau2
        rhs = p0 @ m0 + (X.T @ rinv_u) / st.tau2
        chol_p = cholesky_factor(prec)
        mean = cho_solve((chol_p, True), rhs)
        z = rng.standard_normal(p)
        beta = mean + np.linalg.solve(chol_p.T, z)
    tau2 = st.tau2
    if "tau2" not in config.fixed:
        resid = U - X @ beta
        quad = float(resid @ cho_solve((chol_r, True), resid))
        shape = priors.tau2_shape + len(U) / 2.0
        rate = priors.tau2_rate + quad / 2.0
        tau2 = rate / rng.gamma(shape, 1.0)
    chain.state = set_params(chain.state, beta=beta, tau2=tau2)
    return chain


def tau2_conditional(chain: ChainState, data: Dataset, priors: PriorSpec, dist=None):
    """(shape, rate) of tau2's inverse-gamma full conditional (for checks)."""
    if dist is None:
        dist = data.sites.distance_matrix()
    st = chain.state.field
    chol_r = _corr_chol(dist, st.delta)
    resid = st.U - st.X @ st.beta
    quad = float(resid @ cho_solve((chol_r, True), resid))
    return priors.tau2_shape + len(st.U) / 2.0, priors.tau2_rate + quad / 2.0


def _u_groups(config: ChainConfig, n_sites):
    if config.u_update == "site":
        return [[j] for j in range(n_sites)]
    if config.u_update == "joint":
        return [list(range(n_sites))]
    size = int(config.u_update)
    if size < 1:
        raise ConfigInvalid("u_update block size must be positive")
    return [list(range(i, min(i + size, n_sites))) for i in range(0, n_sites, size)]


def update_random_effects(chain: ChainState, data: Dataset, priors: PriorSpec,
                          config: ChainConfig, rng, evaluator=None, dist=None):
    """Random-walk Metropolis on the latent location effects U.

    The prior term is the latent Gaussian field N(X beta, tau2 R); the
    likelihood term follows the pseudo-marginal contract (fresh seed per
    proposal, retained estimate replaced only on acceptance).
    """
    if "U" in config.fixed:
        return chain
    if dist is None:
        dist = data.sites.distance_matrix()
    st = chain.state.field
    n = len(st.U)
    chol_r = _corr_chol(dist, st.delta)
    prec = cho_solve((chol_r, True), np.eye(n)) / st.tau2
    mean = st.X @ st.beta
    resid = st.U.copy() - mean
    prec_resid = prec @ resid
    for gi, group in enumerate(_u_groups(config, n)):
        key = f"u:{gi}"
        if key not in chain.scales:
            chain.scales[key] = config.scales.get(key, config.u_scale)
        step = chain.scales[key] * rng.standard_normal(len(group))
        dprior = -float(step @ prec_resid[group]) - 0.5 * float(
            step @ prec[np.ix_(group, group)] @ step
        )
        u_new = chain.state.field.U.copy()
        u_new[group] += step
        proposal = set_params(chain.state, U=u_new)
        log_acc = dprior
        ll_new = se_new = seed = None
        if config.likelihood_on:
            seed = seed_key(chain.chain_key, chain.iteration, _PH_U, gi)
            ll_new, se_new = evaluator.total_loglik(chain.partitions, proposal, seed)
            chain.log(kind="eval", phase="u", seed=tuple(seed), loglik=ll_new)
            log_acc += ll_new - chain.retained_loglik
        accepted = log_acc >= 0 or math.log(rng.uniform()) < log_acc
        if accepted:
            chain.state = proposal
            resid[group] += step
            prec_resid += prec[:, group] @ step
            if config.likelihood_on:
                chain.retained_loglik, chain.retained_se = ll_new, se_new
                chain.retained_seed = seed
        chain.count(key, accepted)
        chain.log(kind="accept" if accepted else "reject", kernel=key,
                  retained=chain.retained_loglik)
        if config.adapt and chain.iteration < config.burn_in:
            _adapt_scale(chain, key, accepted, 0.44 if len(group) == 1 else 0.25)

    if (config.u_level_move and "beta" not in config.fixed
            and np.allclose(data.X[:, 0], 1.0)):
        _u_level_move(chain, data, priors, config, rng, evaluator)
    return chain


def _u_level_move(chain: ChainState, data, priors, config, rng, evaluator):
    """Joint shift of U and the intercept coefficient.

    U and beta_0 move together by c, which leaves the latent-field density
    invariant (the intercept column absorbs the shift), so only the
    intercept's prior and the data likelihood weigh in.  This interweaving
    step decouples the location level from the slow site-wise random walk.
    """
    key = "u:level"
    if key not in chain.scales:
        chain.scales[key] = config.scales.get(key, config.u_scale)
    st = chain.state.field
    p = st.X.shape[1]
    m0, p0 = priors.resolved_beta(p)
    c = chain.scales[key] * rng.standard_normal()
    beta_new = st.beta.copy()
    beta_new[0] += c
    d0 = beta_new - m0
    d1 = st.beta - m0
    dprior = -0.5 * float(d0 @ p0 @ d0 - d1 @ p0 @ d1)
    proposal = set_params(chain.state, U=st.U + c, beta=beta_new)
    log_acc = dprior
    ll_new = se_new = seed = None
    if config.likelihood_on:
        seed = seed_key(chain.chain_key, chain.iteration, _PH_U, 9999)
        ll_new, se_new = evaluator.total_loglik(chain.partitions, proposal, seed)
        chain.log(kind="eval", phase="u", seed=tuple(seed), loglik=ll_new)
        log_acc += ll_new - chain.retained_loglik
    accepted = log_acc >= 0 or math.log(rng.uniform()) < log_acc
    if accepted:
        chain.state = proposal
        if config.likelihood_on:
            chain.retained_loglik, chain.retained_se = ll_new, se_new
            chain.retained_seed = seed
    chain.count(key, accepted)
    chain.log(kind="accept" if accepted else "reject", kernel=key,
              retained=chain.retained_loglik)
    if config.adapt and chain.iteration < config.burn_in:
        _adapt_scale(chain, key, accepted, 0.44)


def mh_block_update(chain: ChainState, block, data: Dataset, priors: PriorSpec,
                    config: ChainConfig, rng, evaluator=None, dist=None,
                    block_index=0):
    """One random-walk Metropolis update of a parameter block.

    Proposals are Gaussian on the transformed scale with one shared adapted
    step size; support violations reject before any likelihood work.  The
    Stephenson-Tawn likelihood enters only for blocks touching the margins
    or the dependence; a block containing delta scores the latent-field
    density of U exactly instead.
    """
    block = tuple(block)
    key = "block:" + "|".join(block)
    if key not in chain.scales:
        chain.scales[key] = config.scales.get(key, 0.1)
    if dist is None:
        dist = data.sites.distance_matrix()
    transforms = {p: _Transform(p, priors.scalar(p)) for p in block}
    current = {p: get_param(chain.state, p) for p in block}
    scale = chain.scales[key]
    proposal_vals = {}
    for p in block:
        step = scale * _prior_spread(priors.scalar(p), transforms[p])
        u = transforms[p].forward(current[p]) + step * rng.standard_normal()
        proposal_vals[p] = transforms[p].inverse(u)

    log_prior_diff = 0.0
    ok = True
    for p in block:
        if not _hard_bounds_ok(p, proposal_vals[p]):
            ok = False
            break
        lp_new = priors.scalar(p).logpdf(proposal_vals[p])
        if not np.isfinite(lp_new):
            ok = False
            break
        log_prior_diff += lp_new - priors.scalar(p).logpdf(current[p])
        log_prior_diff += transforms[p].log_jacobian(proposal_vals[p]) \
            - transforms[p].log_jacobian(current[p])
    if not ok:
        chain.count(key, False)
        chain.log(kind="reject", kernel=key, retained=chain.retained_loglik,
                  reason="support")
        if config.adapt and chain.iteration < config.burn_in:
            _adapt_scale(chain, key, False, 0.44 if len(block) == 1 else 0.25)
        return chain

    proposal = set_params(chain.state, **proposal_vals)
    log_acc = log_prior_diff
    if any(p in UPRIOR_PARAMS for p in block):
        st_cur, st_new = chain.state.field, proposal.field
        resid = st_cur.U - st_cur.X @ st_cur.beta
        cur = _gauss_logpdf(resid, cholesky_factor(
            st_cur.tau2 * np.exp(-dist / st_cur.delta)))
        new = _gauss_logpdf(st_new.U - st_new.X @ st_new.beta, cholesky_factor(
            st_new.tau2 * np.exp(-dist / st_new.delta)))
        log_acc += new - cur
    needs_st = any(p in ST_PARAMS for p in block)
    ll_new = se_new = seed = None
    if needs_st and config.likelihood_on:
        seed = seed_key(chain.chain_key, chain.iteration, _PH_BLOCK, block_index)
        ll_new, se_new = evaluator.total_loglik(chain.partitions, proposal, seed)
        chain.log(kind="eval", phase="block", seed=tuple(seed), loglik=ll_new)
        log_acc += ll_new - chain.retained_loglik

    accepted = log_acc >= 0 or math.log(rng.uniform()) < log_acc
    if accepted:
        chain.state = proposal
        if needs_st and config.likelihood_on:
            chain.retained_loglik, chain.retained_se = ll_new, se_new
            chain.retained_seed = seed
    chain.count(key, accepted)
    chain.log(kind="accept" if accepted else "reject", kernel=key,
              retained=chain.retained_loglik)
    if config.adapt and chain.iteration < config.burn_in:
        _adapt_scale(chain, key, accepted, 0.44 if len(block) == 1 else 0.25)
    return chain


def update_partitions(chain: ChainState, data: Dataset, config: ChainConfig,
                      evaluator: LikelihoodEvaluator, rng=None):
    """Gibbs sweeps over every winter's partition, then one fresh refresh
    of the retained likelihood estimate at the new augmented state."""
    model = evaluator.sweep_model_for(chain.state.variogram)
    for yi, year in enumerate(data.years):
        z, _, ok = evaluator.frechet_year(yi, chain.state.field)
        if not ok:
            continue
        zvec = FrechetVector(z, data.observed_sites(yi))
        pi = chain.partitions[year]
        for sweep in range(config.partition_sweeps):
            pi = gibbs_sweep(
                pi, zvec, model,
                seed=seed_key(chain.chain_key, chain.iteration, _PH_PARTITION,
                              year, sweep),
            )
        chain.partitions[year] = pi
    if config.likelihood_on:
        seed = seed_key(chain.chain_key, chain.iteration, _PH_REFRESH)
        ll, se = evaluator.total_loglik(chain.partitions, chain.state, seed)
        chain.log(kind="eval", phase="refresh", seed=tuple(seed), loglik=ll)
        chain.retained_loglik, chain.retained_se = ll, se
        chain.retained_seed = seed
        chain.log(kind="refresh", retained=ll)
    return chain


# ---------------------------------------------------------------------------
# initialization


def initialize_state(data: Dataset, priors: PriorSpec, rng, overrides=None):
    """Data-driven starting point inside every prior's support.

    Station-wise GEV fits of the negated minima seed U, sigma and xi; the
    dependence range starts at the median pairwise distance.  The margins
    are inflated until every observation lies strictly inside the GEV
    support.  overrides maps parameter names to fixed starting values.
    """
    import warnings as _warnings

    overrides = dict(overrides or {})
    d = data.sites.n_sites
    mus, sigmas, xis = [], [], []
    for j in range(d):
        sample = -data.minima[np.isfinite(data.minima[:, j]), j]
        try:
            with _warnings.catch_warnings():
                _warnings.simplefilter("ignore")
                params, _ = fit_gev_site(sample)
            mus.append(params.mu)
            sigmas.append(params.sigma)
            xis.append(params.xi)
        except Exception:
            mus.append(float(np.mean(sample)))
            sigmas.append(float(np.std(sample, ddof=1)) or 1.0)
            xis.append(0.0)
    U = np.asarray(mus)

    def clipped(name, value):
        lo, hi = priors.scalar(name).bounds
        span = hi - lo
        pad = 1e-6 * span if np.isfinite(span) else 1e-6
        return float(np.clip(value, lo + pad, hi - pad))

    sigma = clipped("sigma", np.median(sigmas))
    xi = clipped("xi", np.clip(np.median(xis), -0.35, 0.35))
    alpha = clipped("alpha", 0.0)
    dist = data.sites.distance_matrix()
    med = np.median(dist[np.triu_indices(d, 1)]) if d > 1 else 100.0
    lam = clipped("lam", med)
    kappa = clipped("kappa", 1.0)
    delta = clipped("delta", med)
    beta, *_ = np.linalg.lstsq(data.X, U, rcond=None)
    resid = U - data.X @ beta
    tau2 = float(max(np.var(resid), 0.05))

    values = dict(U=U, sigma=sigma, xi=xi, alpha=alpha, lam=lam, kappa=kappa,
                  delta=delta, beta=beta, tau2=tau2)
    values.update(overrides)

    field = GevField(values["beta"], values["U"], values["alpha"], values["sigma"],
                     values["xi"], values["tau2"], values["delta"], data.X)
    state = ParameterState(field, StableVariogram(values["lam"], values["kappa"]))

    # enlarge sigma until all transformed observations are in support
    for _ in range(200):
        obs = data.observed_mask
        v = -data.minima[obs]
        mu = state.field.U[np.where(obs)[1]] + state.field.alpha * data.t[obs]
        if state.field.xi >= 0 or np.all(1 + state.field.xi * (v - mu) / state.field.sigma > 1e-6):
            break
        state = set_params(state, sigma=state.field.sigma * 1.25)
    return state


def initial_partitions(data: Dataset, how="singletons"):
    if how == "singletons":
        return {
            year: SetPartition.singletons(data.observed_sites(yi))
            for yi, year in enumerate(data.years)
        }
    raise ConfigInvalid(f"unknown partition initialization {how!r}")


# ---------------------------------------------------------------------------
# chain driver


def _iterate(chain: ChainState, data, priors, config, evaluator, dist, rng):
    if config.mode == "m3":
        update_partitions(chain, data, config, evaluator)
    conjugate_updates(chain, data, priors, config, rng, dist)
    update_random_effects(chain, data, priors, config, rng, evaluator, dist)
    for bi, block in enumerate(config.active_blocks()):
        mh_block_update(chain, block, data, priors, config, rng, evaluator, dist,
                        block_index=bi)
    chain.iteration += 1
    return chain


def scalar_columns(data: Dataset):
    cols = ["alpha", "sigma", "xi", "lam", "kappa", "tau2", "delta"]
    cols += [f"beta_{k}" for k in range(data.X.shape[1])]
    cols += [f"U_{sid}" for sid in data.sites.ids]
    return cols


def _row_of(chain: ChainState, data: Dataset):
    st = chain.state
    vals = [st.field.alpha, st.field.sigma, st.field.xi, st.variogram.lam,
            st.variogram.kappa, st.field.tau2, st.field.delta]
    vals += list(st.field.beta)
    vals += list(st.field.U)
    vals.append(chain.retained_loglik)
    return vals


def run_chain(chain_index, chain_key, data: Dataset, priors: PriorSpec,
              config: ChainConfig, fixed_partitions=None, init_overrides=None,
              keep_audit=False):
    """Run one chain; returns a dict with samples and bookkeeping."""
    rng = np.random.default_rng(seed_key(chain_key, 0))
    state = initialize_state(data, priors, rng, overrides=init_overrides)
    if config.mode == "m2" and fixed_partitions is not None:
        partitions = {y: fixed_partitions[y] for y in data.years}
    elif config.mode == "m2" and config.likelihood_on:
        raise ConfigInvalid("mode 'm2' requires fixed partitions")
    else:
        partitions = dict(fixed_partitions) if fixed_partitions else initial_partitions(data)

    evaluator = LikelihoodEvaluator(
        data, n_samples=config.n_samples, n_shifts=config.n_shifts,
        reorder=config.mvn_reorder, sweep_n_samples=config.sweep_n_samples,
    )
    if config.likelihood_on:
        seed = seed_key(chain_key, 0, _PH_REFRESH, 999)
        ll, se = evaluator.total_loglik(partitions, state, seed)
    else:
        ll, se, seed = 0.0, 0.0, None
    chain = ChainState(state=state, partitions=partitions, retained_loglik=ll,
                       retained_se=se, retained_seed=seed, chain_key=chain_key,
                       audit=[] if (config.audit or keep_audit) else None)

    dist = data.sites.distance_matrix()
    rows = []
    kept_iters = []
    partition_rows = []
    for it in range(config.n_iter):
        _iterate(chain, data, priors, config, evaluator, dist, rng)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            rows.append(_row_of(chain, data))
            kept_iters.append(it)
            if config.mode == "m3" and (it - config.burn_in) % config.store_partitions_every == 0:
                partition_rows.append(
                    (chain_index, it, {y: p.serialize() for y, p in chain.partitions.items()})
                )
    return dict(
        chain_index=chain_index,
        rows=np.asarray(rows),
        iterations=np.asarray(kept_iters),
        partitions=partition_rows,
        acceptance=chain.acceptance_rates(),
        scales=dict(chain.scales),
        audit=chain.audit,
        final_partitions={y: p.serialize() for y, p in chain.partitions.items()},
    )


def _chain_worker(args):
    return run_chain(*args)


# ---------------------------------------------------------------------------
# posterior container and convergence diagnostics


def split_rhat(per_chain):
    """Split-chain potential scale reduction factor.

    per_chain is (n_chains, n_draws); each chain is halved before the usual
    between/within variance comparison.
    """
    x = np.asarray(per_chain, dtype=float)
    n = x.shape[1] // 2
    if n < 2:
        return float("nan")
    halves = np.concatenate([x[:, :n], x[:, -n:]], axis=0)
    within = halves.var(axis=1, ddof=1).mean()
    between = n * halves.mean(axis=1).var(ddof=1)
    if within == 0:
        return 1.0
    return float(np.sqrt((n - 1) / n + between / (n * within)))


def effective_sample_size(per_chain):
    """Autocorrelation-based ESS with Geyer's initial positive-sequence cut.

    The integrated autocorrelation time sums consecutive lag pairs
    rho(2k-1) + rho(2k) while they stay positive.
    """
    x = np.asarray(per_chain, dtype=float)
    m, n = x.shape
    if n < 4:
        return float(m * n)
    acov = np.zeros(n)
    for row in x:
        centered = row - row.mean()
        acov += np.correlate(centered, centered, mode="full")[n - 1 :] / n
    acov /= m
    if acov[0] <= 0:
        return float(m * n)
    rho = acov / acov[0]
    tau = 1.0
    for k in range(1, (n - 1) // 2):
        pair = rho[2 * k - 1] + rho[2 * k]
        if pair < 0:
            break
        tau += 2.0 * pair
    return float(m * n / tau)


@dataclass
class PosteriorSamples:
    """Merged post-burn-in draws from all chains."""

    columns: tuple
    rows: np.ndarray
    chain_ids: np.ndarray
    iterations: np.ndarray
    acceptance: dict
    partition_rows: list = field(default_factory=list)
    n_chains: int = 1

    def column(self, name):
        return self.rows[:, self.columns.index(name)]

    def per_chain(self, name):
        col = self.column(name)
        return np.stack([col[self.chain_ids == c] for c in range(self.n_chains)])

    def mean(self, name):
        return float(self.column(name).mean())

    def ci(self, name, level=0.95):
        a = (1.0 - level) / 2.0
        col = self.column(name)
        return float(np.quantile(col, a)), float(np.quantile(col, 1.0 - a))

    def rhat(self, name):
        return split_rhat(self.per_chain(name))

    def ess(self, name):
        return effective_sample_size(self.per_chain(name))

    def summary_rows(self, names=None):
        names = names or [c for c in self.columns if c not in ("loglik",)]
        out = []
        for name in names:
            lo, hi = self.ci(name)
            out.append((name, self.mean(name), lo, hi, self.rhat(name), self.ess(name)))
        return out

    def summary(self, names=None):
        lines = [
            f"{'parameter':<12} {'mean':>12} {'2.5%':>12} {'97.5%':>12} {'Rhat':>8} {'ESS':>10}"
        ]
        for name, mean, lo, hi, rhat, ess in self.summary_rows(names):
            lines.append(
                f"{name:<12} {mean:>12.4f} {lo:>12.4f} {hi:>12.4f} {rhat:>8.3f} {ess:>10.0f}"
            )
        lines.append("")
        lines.append("acceptance rates: " + ", ".join(
            f"{k}={v:.2f}" for k, v in sorted(self.acceptance.items())
        ))
        return "\n".join(lines)

    def save_csv(self, path):
        header = ["chain", "iteration"] + list(self.columns)
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for cid, it, row in zip(self.chain_ids, self.iterations, self.rows):
                fh.write(",".join([str(int(cid)), str(int(it))] + [repr(float(v)) for v in row]) + "\n")


def run_chains(config: ChainConfig, data: Dataset, priors: PriorSpec, master_seed=0,
               fixed_partitions=None, init_overrides=None, threads=1):
    """Run independent chains and merge the retained draws.

    Chains get disjoint RNG streams spawned from master_seed; with
    threads > 1 they execute in separate processes.  Deterministic given
    master_seed regardless of thread count.
    """
    keys = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master_seed).spawn(config.n_chains)]
    jobs = [
        (ci, keys[ci], data, priors, config, fixed_partitions, init_overrides)
        for ci in range(config.n_chains)
    ]
    if threads and threads > 1 and config.n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(threads, config.n_chains)) as pool:
            results = list(pool.map(_chain_worker, jobs))
    else:
        results = [_chain_worker(job) for job in jobs]
    results.sort(key=lambda r: r["chain_index"])

    columns = tuple(scalar_columns(data) + ["loglik"])
    rows = np.concatenate([r["rows"] for r in results], axis=0)
    chain_ids = np.concatenate([
        np.full(len(r["rows"]), r["chain_index"]) for r in results
    ])
    iterations = np.concatenate([r["iterations"] for r in results])
    acceptance = {}
    for r in results:
        for k, v in r["acceptance"].items():
            acceptance.setdefault(k, []).append(v)
    acceptance = {k: float(np.mean(v)) for k, v in acceptance.items()}
    partition_rows = [p for r in results for p in r["partitions"]]
    return PosteriorSamples(
        columns=columns, rows=rows, chain_ids=chain_ids, iterations=iterations,
        acceptance=acceptance, partition_rows=partition_rows,
        n_chains=config.n_chains,
    )
