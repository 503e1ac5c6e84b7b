"""Independent reference computations used to pin expected test values.

Everything here is deliberately written against textbook formulas or brute
force (quadrature, finite differences, exhaustive recursion) and never
calls the code paths it is meant to check.
"""

import numpy as np
from scipy import integrate
from scipy.stats import multivariate_normal, norm

# Bell numbers B_0..B_12 (OEIS A000110, hand-checkable via the Bell triangle).
BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597]


def hr_bivariate_v(z1, z2, two_gamma):
    """Bivariate Brown-Resnick (Huesler-Reiss) exponent function."""
    a = np.sqrt(two_gamma)
    return (
        norm.cdf(a / 2 + np.log(z2 / z1) / a) / z1
        + norm.cdf(a / 2 + np.log(z1 / z2) / a) / z2
    )


def hr_bivariate_neg_v1(z1, z2, two_gamma):
    """-dV/dz1 for the bivariate closed form (cancellation done by hand)."""
    a = np.sqrt(two_gamma)
    return norm.cdf(a / 2 + np.log(z2 / z1) / a) / z1**2


def hr_bivariate_density(z1, z2, two_gamma):
    """Full bivariate density d^2/dz1 dz2 exp(-V), differentiated by hand."""
    a = np.sqrt(two_gamma)
    u = np.log(z2 / z1)
    v = hr_bivariate_v(z1, z2, two_gamma)
    d1 = hr_bivariate_neg_v1(z1, z2, two_gamma)
    d2 = hr_bivariate_neg_v1(z2, z1, two_gamma)
    # -V_{12} = phi(a/2 + u/a) / (a z1^2 z2) (symmetric in the pair)
    d12 = norm.pdf(a / 2 + u / a) / (a * z1**2 * z2)
    return np.exp(-v) * (d1 * d2 + d12)


def mvn_cdf_quadrature(upper, cov):
    """Brute-force MVN orthant/cdf by adaptive quadrature (dims 2 and 3)."""
    upper = np.asarray(upper, dtype=float)
    rv = multivariate_normal(mean=np.zeros(len(upper)), cov=cov)
    lo = -9.0
    if len(upper) == 2:
        val, _ = integrate.dblquad(
            lambda y, x: rv.pdf([x, y]), lo, upper[0],
            lambda x: lo, lambda x: upper[1], epsabs=1e-10,
        )
        return val
    if len(upper) == 3:
        val, _ = integrate.tplquad(
            lambda z, y, x: rv.pdf([x, y, z]), lo, upper[0],
            lambda x: lo, lambda x: upper[1],
            lambda x, y: lo, lambda x, y: upper[2], epsabs=1e-9,
        )
        return val
    raise ValueError("quadrature oracle covers dimensions 2 and 3 only")


def enumerate_partitions_reference(items):
    """All set partitions by plain recursion (independent of the library)."""
    items = list(items)
    if not items:
        return [[]]
    first, rest = items[0], items[1:]
    out = []
    for sub in enumerate_partitions_reference(rest):
        out.append([[first]] + [list(b) for b in sub])
        for k in range(len(sub)):
            grown = [list(b) for b in sub]
            grown[k] = [first] + grown[k]
            out.append(grown)
    return out


def mixed_fd_exp_neg_v(value_fn, z, steps):
    """Mixed central finite difference of exp(-V) across all coordinates.

    value_fn(z) must return V(z) evaluated under one fixed seed so the
    Monte Carlo error surface stays smooth in z.
    """
    z = np.asarray(z, dtype=float)
    steps = np.asarray(steps, dtype=float)
    d = len(z)
    total = 0.0
    for code in range(1 << d):
        signs = np.array([1.0 if code >> i & 1 else -1.0 for i in range(d)])
        zz = z + signs * steps
        total += np.prod(signs) * np.exp(-value_fn(zz))
    return total / np.prod(2.0 * steps)


def gev_cdf_reference(y, mu, sigma, xi):
    """Textbook GEV cdf, written independently of the library's version."""
    if abs(xi) < 1e-12:
        return float(np.exp(-np.exp(-(y - mu) / sigma)))
    b = 1.0 + xi * (y - mu) / sigma
    if b <= 0:
        return 0.0 if xi > 0 else 1.0
    return float(np.exp(-(b ** (-1.0 / xi))))


def gev_mean_reference(mu, sigma, xi):
    from scipy.special import gamma

    if abs(xi) < 1e-12:
        return mu + sigma * np.euler_gamma
    return mu + sigma * (gamma(1.0 - xi) - 1.0) / xi
