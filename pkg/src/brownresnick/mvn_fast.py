"""Optional compiled kernel for the sequential-conditioning integrand.

The Monte Carlo weights inside partition sweeps evaluate thousands of tiny
Gaussian CDF problems per iteration, where numpy's per-call overhead
dominates.  When numba is available the integrand runs as machine code; the
numpy fallback in mvn.py stays the reference implementation.

The inverse normal CDF uses Acklam's rational approximation polished by one
Halley step against erfc, giving full double precision over the clipped
argument range.
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True)
def _norm_ppf(p):
    # Acklam's rational approximation with one Halley refinement
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
              + 4.374664141464968e+00) * q + 2.938163982698783e+00) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    elif p <= 0.97575:
        q = p - 0.5
        r = q * q
        x = (((((-3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                - 2.759285104469687e+02) * r + 1.383577518672690e+02) * r
              - 3.066479806614716e+01) * r + 2.506628277459239e+00) * q / (
            ((((-5.447609879822406e+01 * r + 1.615858368580409e+02) * r
               - 1.556989798598866e+02) * r + 6.680131188771972e+01) * r
             - 1.328068155288572e+01) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((-7.784894002430293e-03 * q - 3.223964580411365e-01) * q
                 - 2.400758277161838e+00) * q - 2.549732539343734e+00) * q
               + 4.374664141464968e+00) * q + 2.938163982698783e+00) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
              + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    # one Halley step: e = Phi(x) - p, u = e / phi(x)
    e = 0.5 * math.erfc(-x / _SQRT2) - p
    u = e * _SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@njit(cache=True)
def sov_batch(lower, b, u):
    """Sequential-conditioning integrand for m problems on n cube points.

    lower (m, d, d), b (m, d), u (n, d-1) -> (m, n); mirrors the numpy
    reference in mvn._sov_integrand_batch.
    """
    m, d = b.shape
    n = u.shape[0]
    out = np.empty((m, n))
    y = np.empty(d)
    for i in range(m):
        e0 = _norm_cdf(b[i, 0] / lower[i, 0, 0])
        for k in range(n):
            f = e0
            e_prev = e0
            for s in range(1, d):
                q = u[k, s - 1] * e_prev
                if q < 1e-300:
                    q = 1e-300
                elif q > 1.0 - 1e-16:
                    q = 1.0 - 1e-16
                y[s - 1] = _norm_ppf(q)
                c = b[i, s]
                for t in range(s):
                    c -= y[t] * lower[i, s, t]
                c /= lower[i, s, s]
                e_prev = _norm_cdf(c)
                f *= e_prev
            out[i, k] = f
    return out


@njit(cache=True)
def sov_batch_ragged(covs, b, dims, u):
    """Integrand for problems of mixed dimensions in one call.

    covs (m, dmax, dmax) and b (m, dmax) are zero-padded; dims gives each
    problem's true dimension.  Factorization happens in-kernel (pivots
    floored rather than jittered; the partial-derivative covariances this
    serves are positive definite by construction).  u is (n, dmax - 1);
    problem i consumes its first dims[i] - 1 coordinates.
    """
    m = b.shape[0]
    n = u.shape[0]
    dmax = b.shape[1]
    out = np.empty((m, n))
    lower = np.empty((dmax, dmax))
    y = np.empty(dmax)
    for i in range(m):
        d = dims[i]
        for r in range(d):
            for c in range(r + 1):
                acc = covs[i, r, c]
                for t in range(c):
                    acc -= lower[r, t] * lower[c, t]
                if r == c:
                    lower[r, r] = math.sqrt(acc) if acc > 1e-300 else 1e-150
                else:
                    lower[r, c] = acc / lower[c, c]
        e0 = _norm_cdf(b[i, 0] / lower[0, 0])
        for k in range(n):
            f = e0
            e_prev = e0
            for s in range(1, d):
                q = u[k, s - 1] * e_prev
                if q < 1e-300:
                    q = 1e-300
                elif q > 1.0 - 1e-16:
                    q = 1.0 - 1e-16
                y[s - 1] = _norm_ppf(q)
                c = b[i, s]
                for t in range(s):
                    c -= y[t] * lower[s, t]
                c /= lower[s, s]
                e_prev = _norm_cdf(c)
                f *= e_prev
            out[i, k] = f
    return out
