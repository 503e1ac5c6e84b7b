"""GEV margins, the nonstationary location model and Frechet transforms.

Sign convention: winter minima are stored as observed (degrees C) and
negated exactly once, at the likelihood boundary.  The marginal model is

    -y[i, j] ~ GEV( U_j + alpha * t[i, j], sigma, xi ),

with U the latent Gaussian location surface (mean X beta, covariance
tau^2 exp(-||h||/delta)) and t the occurrence-day covariate in years from
2000-01-01.  All user-facing temperature quantities are reported back on
the minimum scale.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import gamma as gamma_fn

from .errors import NonConvergence, OutOfSupport, ShapeTooLarge

# Shapes closer to zero than this use the Gumbel limit expressions.
XI_EPS = 1e-8

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class GevParams:
    """Location / scale / shape of a single GEV distribution."""

    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValueError(f"scale must be positive, got {self.sigma}")


def _bracket(y, p: GevParams):
    """1 + xi (y - mu) / sigma, the GEV support bracket."""
    return 1.0 + p.xi * (np.asarray(y, dtype=float) - p.mu) / p.sigma


def gev_cdf(p: GevParams, y):
    y = np.asarray(y, dtype=float)
    if abs(p.xi) < XI_EPS:
        out = np.exp(-np.exp(-(y - p.mu) / p.sigma))
    else:
        b = _bracket(y, p)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(b > 0, np.exp(-np.maximum(b, 1e-300) ** (-1.0 / p.xi)), 0.0)
        # above the upper endpoint (xi < 0) the cdf is 1, not 0
        if p.xi < 0:
            out = np.where(b <= 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def gev_pdf(p: GevParams, y):
    y = np.asarray(y, dtype=float)
    if abs(p.xi) < XI_EPS:
        w = (y - p.mu) / p.sigma
        out = np.exp(-w - np.exp(-w)) / p.sigma
    else:
        b = _bracket(y, p)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            bb = np.maximum(b, 1e-300)
            out = np.where(
                b > 0,
                bb ** (-1.0 / p.xi - 1.0) * np.exp(-(bb ** (-1.0 / p.xi))) / p.sigma,
                0.0,
            )
    return float(out) if out.ndim == 0 else out


def gev_logpdf(p: GevParams, y):
    y = np.asarray(y, dtype=float)
    if abs(p.xi) < XI_EPS:
        w = (y - p.mu) / p.sigma
        out = -w - np.exp(-w) - math.log(p.sigma)
    else:
        b = _bracket(y, p)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            logb = np.log(np.maximum(b, 1e-300))
            out = np.where(
                b > 0,
                (-1.0 / p.xi - 1.0) * logb - np.exp(-logb / p.xi) - math.log(p.sigma),
                -np.inf,
            )
    return float(out) if out.ndim == 0 else out


def gev_quantile(p: GevParams, prob):
    prob = np.asarray(prob, dtype=float)
    if np.any((prob <= 0) | (prob >= 1)):
        raise ValueError("quantile argument must lie in (0, 1)")
    w = -np.log(prob)
    if abs(p.xi) < XI_EPS:
        out = p.mu - p.sigma * np.log(w)
    else:
        out = p.mu + p.sigma * (w ** (-p.xi) - 1.0) / p.xi
    return float(out) if out.ndim == 0 else out


def gev_eval(p: GevParams, y, kind):
    """Dispatcher over 'cdf' | 'pdf' | 'quantile'."""
    if kind == "cdf":
        return gev_cdf(p, y)
    if kind == "pdf":
        return gev_pdf(p, y)
    if kind == "quantile":
        return gev_quantile(p, y)
    raise ValueError(f"unknown kind {kind!r}")


def gev_mean(p: GevParams):
    """Mean of the GEV; requires xi < 1."""
    if p.xi >= 1:
        raise ShapeTooLarge(f"GEV mean undefined for shape {p.xi} >= 1")
    if abs(p.xi) < XI_EPS:
        return p.mu + p.sigma * EULER_GAMMA
    return p.mu + p.sigma * (gamma_fn(1.0 - p.xi) - 1.0) / p.xi


@dataclass(frozen=True)
class GevField:
    """Marginal model over the stations.

    beta: trend-surface coefficients (intercept + 6 covariates);
    U: latent location effects at the stations (degrees C, negated-minima
    scale); alpha: linear trend per year; sigma, xi: shared scale/shape;
    tau2, delta: latent-field variance and correlation range (km);
    X: the D x 7 station covariate matrix.
    """

    beta: np.ndarray
    U: np.ndarray
    alpha: float
    sigma: float
    xi: float
    tau2: float
    delta: float
    X: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        U = np.atleast_1d(np.asarray(self.U, dtype=float))
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if X.shape != (len(U), len(beta)):
            raise ValueError(
                f"covariate matrix {X.shape} incompatible with beta {beta.shape} / U {U.shape}"
            )
        if not (self.sigma > 0 and self.tau2 > 0 and self.delta > 0):
            raise ValueError("sigma, tau2 and delta must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "X", X)

    @property
    def n_sites(self):
        return len(self.U)

    def location(self, site, t):
        """GEV location of the negated minima at a station and time offset."""
        return float(self.U[site]) + self.alpha * np.asarray(t, dtype=float)

    def site_params(self, site, t):
        return GevParams(self.location(site, t), self.sigma, self.xi)


def frechet_value(v, mu, sigma, xi):
    """f(v) = {1 + xi (v - mu)/sigma}_+^{1/xi}; exp((v - mu)/sigma) at xi = 0.

    Vectorized; returns nan where v is outside the support.
    """
    v = np.asarray(v, dtype=float)
    if abs(xi) < XI_EPS:
        return np.exp((v - mu) / sigma)
    b = 1.0 + xi * (v - mu) / sigma
    with np.errstate(invalid="ignore"):
        return np.where(b > 0, np.maximum(b, 1e-300) ** (1.0 / xi), np.nan)


def frechet_pair(field: GevField, site, t, y):
    """Frechet transform and its derivative at an observed minimum y.

    Returns (f(-y), f'(-y)) for the station's GEV at time offset t; the
    derivative is with respect to the transform's own argument.  Raises
    OutOfSupport when -y falls outside the support, which the likelihood
    treats as -inf rather than an error.
    """
    mu = field.location(site, t)
    v = -float(y)
    sigma, xi = field.sigma, field.xi
    if abs(xi) < XI_EPS:
        f = math.exp((v - mu) / sigma)
        return f, f / sigma
    b = 1.0 + xi * (v - mu) / sigma
    if b <= 0:
        raise OutOfSupport(
            f"negated minimum {v} outside GEV support at site {site} (bracket {b:.3g})"
        )
    f = b ** (1.0 / xi)
    fprime = b ** (1.0 / xi - 1.0) / sigma
    return f, fprime


def frechet_and_logjac(v, mu, sigma, xi):
    """Vectorized Frechet values and log-derivatives for the likelihood.

    v holds negated minima with matching locations mu.  Returns
    (z, log_jac, ok): outside the support ok is False and the entries are
    undefined.
    """
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if abs(xi) < XI_EPS:
        w = (v - mu) / sigma
        z = np.exp(w)
        return z, w - math.log(sigma), np.ones_like(v, dtype=bool)
    b = 1.0 + xi * (v - mu) / sigma
    ok = b > 0
    bb = np.where(ok, b, 1.0)
    logb = np.log(bb)
    z = np.exp(logb / xi)
    log_jac = (1.0 / xi - 1.0) * logb - math.log(sigma)
    return z, log_jac, ok


def gev_mean_forecast(field: GevField, site, t):
    """Mean winter minimum (degrees C) at a station for year offset t.

    The negated-minima GEV mean U_j + alpha t + sigma {Gamma(1 - xi) - 1}/xi
    converted back to the minimum-temperature sign convention.
    """
    params = field.site_params(site, t)
    return -gev_mean(params)


def exceedance_prob(field: GevField, site, t, threshold=-36.0):
    """Pr(winter minimum > threshold) at a station and year offset.

    Equals the negated-minima GEV cdf evaluated at -threshold.
    """
    return gev_cdf(field.site_params(site, t), -threshold)


def _gev_negloglik(theta, sample):
    mu, log_sigma, xi = theta
    sigma = math.exp(log_sigma)
    if abs(xi) < XI_EPS:
        w = (sample - mu) / sigma
        return float(np.sum(w + np.exp(-w)) + len(sample) * log_sigma)
    b = 1.0 + xi * (sample - mu) / sigma
    if np.any(b <= 0):
        return np.inf
    logb = np.log(b)
    return float(
        np.sum((1.0 / xi + 1.0) * logb + np.exp(-logb / xi)) + len(sample) * log_sigma
    )


def _numerical_hessian(fun, theta, step=1e-4):
    k = len(theta)
    hess = np.empty((k, k))
    hs = step * np.maximum(1.0, np.abs(theta))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = hs[i]
            ej[j] = hs[j]
            hess[i, j] = hess[j, i] = (
                fun(theta + ei + ej) - fun(theta + ei - ej)
                - fun(theta - ei + ej) + fun(theta - ei - ej)
            ) / (4 * hs[i] * hs[j])
    return hess


def fit_gev_site(samples):
    """Maximum-likelihood GEV fit to a univariate sample.

    Optimizes (mu, log sigma, xi) from several shape restarts and derives
    standard errors from the numerical Hessian.  Returns
    (GevParams, {'mu': se, 'sigma': se, 'xi': se}).  The sample is fitted
    as given; negate winter minima before calling when the negated-minima
    convention is wanted.
    """
    sample = np.asarray(samples, dtype=float)
    sample = sample[np.isfinite(sample)]
    n = len(sample)
    if n < 2 or np.ptp(sample) == 0.0:
        raise NonConvergence("sample is degenerate (constant or too short)")
    if n < 20:
        warnings.warn(f"GEV fit on only {n} values; estimates will be unstable")
    sd = sample.std(ddof=1)
    sigma0 = math.sqrt(6.0) * sd / math.pi
    mu0 = sample.mean() - EULER_GAMMA * sigma0
    best = None
    for xi0 in (-0.2, 1e-4, 0.2):
        res = minimize(
            _gev_negloglik, np.array([mu0, math.log(sigma0), xi0]),
            args=(sample,), method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 5000},
        )
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None or not np.isfinite(best.fun):
        raise NonConvergence("GEV likelihood optimization failed from every restart")
    mu, log_sigma, xi = best.x
    sigma = math.exp(log_sigma)
    hess = _numerical_hessian(lambda th: _gev_negloglik(th, sample), best.x)
    try:
        cov = np.linalg.inv(hess)
        se_mu, se_logsigma, se_xi = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        se_mu = se_logsigma = se_xi = np.nan
    errors = {"mu": se_mu, "sigma": sigma * se_logsigma, "xi": se_xi}
    return GevParams(mu, sigma, xi), errors
