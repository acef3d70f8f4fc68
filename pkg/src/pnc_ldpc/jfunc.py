"""J-function: mutual information of a consistent Gaussian LLR with its bit.

``J(sigma)`` is evaluated by adaptive quadrature (``j_exact``); the
vectorized ``J``/``J_inv`` used in the curve computations interpolate a
cubic spline tabulated from that quadrature.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline

I_MAX = 1.0 - 1e-9
_TABLE_STEP = 0.01
_TABLE_MAX = 16.0


def j_exact(sigma: float) -> float:
    """1 - E[log2(1 + exp(-L))], L ~ N(sigma^2/2, sigma^2), by adaptive quadrature."""
    sigma = float(sigma)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return 0.0
    mu = sigma * sigma / 2

    def integrand(x):
        ell = mu + sigma * x
        return np.exp(-0.5 * x * x) * np.logaddexp(0.0, -ell)

    # the loss term lives where ell is O(1), i.e. near x = -sigma/2
    pts = sorted({-sigma / 2, 0.0})
    pts = [p for p in pts if -40 < p < 40]
    val, _ = integrate.quad(integrand, -40.0, 40.0, points=pts, epsabs=1e-14, epsrel=1e-12, limit=400)
    return float(1.0 - val / (np.sqrt(2 * np.pi) * np.log(2)))


def j_inv_exact(info: float) -> float:
    """Bracketed root of j_exact; I >= 1 - 1e-9 is clamped."""
    info = float(info)
    if info <= 0:
        return 0.0
    info = min(info, I_MAX)
    return float(optimize.brentq(lambda s: j_exact(s) - info, 0.0, _TABLE_MAX, xtol=1e-12, rtol=1e-14))


def _j_fixed_rule(sigma: np.ndarray) -> np.ndarray:
    """Composite 10-point Gauss-Legendre over x in [-13, 13] for many sigma at once."""
    nodes, weights = np.polynomial.legendre.leggauss(10)
    edges = np.linspace(-13.0, 13.0, 1041)
    half = np.diff(edges)[:, None] / 2
    x = ((edges[:-1, None] + edges[1:, None]) / 2 + half * nodes).ravel()
    w = (half * weights).ravel() * np.exp(-0.5 * x * x)
    out = np.empty(sigma.size)
    for i, s in enumerate(sigma):
        out[i] = w @ np.logaddexp(0.0, -(s * s / 2 + s * x))
    return 1.0 - out / (np.sqrt(2 * np.pi) * np.log(2))


@lru_cache(maxsize=1)
def _table():
    sig = np.arange(0.0, _TABLE_MAX + _TABLE_STEP / 2, _TABLE_STEP)
    vals = _j_fixed_rule(sig)
    vals[0] = 0.0
    return sig, CubicSpline(sig, vals)


def J(sigma):
    """Vectorized J-function; clipped to [0, 1]."""
    sig, spline = _table()
    s = np.asarray(sigma, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("sigma must be nonnegative")
    out = np.where(s >= sig[-1], 1.0, spline(np.minimum(s, sig[-1])))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


@lru_cache(maxsize=1)
def sigma_max() -> float:
    return j_inv_exact(I_MAX)


def J_inv(info):
    """Vectorized inverse of J by bisection on the tabulated spline."""
    _, spline = _table()
    i = np.clip(np.asarray(info, dtype=np.float64), 0.0, I_MAX)
    lo = np.zeros_like(i)
    hi = np.full_like(i, sigma_max() * 1.001)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = spline(mid) < i
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.where(i <= 0, 0.0, 0.5 * (lo + hi))
    return out if out.ndim else float(out)


def mutual_information(llr, bits) -> float:
    """Time-average MI estimate ``1 - mean(ln(1 + exp(z * (-1)^b))) / ln 2``.

    LLRs are ``ln P(1) - ln P(0)``, so a correct, confident LLR has sign
    opposite to (-1)^b and contributes nothing.
    """
    z = np.asarray(llr, dtype=np.float64).ravel()
    b = np.asarray(bits).ravel()
    if z.size == 0:
        raise ValueError("empty LLR vector")
    if z.size != b.size:
        raise ValueError("LLR and bit vectors differ in length")
    sgn = 1.0 - 2.0 * (b & 1)
    return float(1.0 - np.logaddexp(0.0, z * sgn).sum() / (z.size * np.log(2)))


measure_mutual_information = mutual_information
