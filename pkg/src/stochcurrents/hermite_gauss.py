"""Hermite polynomials in the 1/n! normalization and Gaussian kernels.

Throughout the package

    H_n(x) = ((-1)^n / n!) e^{x^2/2} (d/dx)^n e^{-x^2/2} = He_n(x) / n!

where He_n is the monic probabilists' polynomial.  The three-term recurrence
that encodes this normalization is

    (n + 1) H_{n+1}(x) = x H_n(x) - H_{n-1}(x),   H_0 = 1, H_1(x) = x.

High orders are evaluated in weighted form H_n(y) e^{-y^2/2} with a running
log-scale per point, so neither the polynomial nor the Gaussian factor is
ever formed on its own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import CapacityError, DomainError

N_HARD_MAX = 2000

_BIG = 1e250
_SMALL = 1e-250


@dataclass(frozen=True)
class GaussKernelParams:
    variance: float
    dimension: int = 1

    def __post_init__(self):
        if not self.variance > 0 or not math.isfinite(self.variance):
            raise DomainError(f"variance must be positive, got {self.variance}")
        if int(self.dimension) < 1:
            raise DomainError(f"dimension must be >= 1, got {self.dimension}")


def check_order(n, ceiling=None):
    ceiling = N_HARD_MAX if ceiling is None else ceiling
    n = int(n)
    if n < 0:
        raise DomainError(f"Hermite order must be non-negative, got {n}")
    if n > ceiling:
        raise CapacityError(f"order {n} exceeds table ceiling {ceiling}")
    return n


def _as_finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("argument must be finite")
    return x


def _rescale(m_prev, m_cur, logscale):
    mag = np.maximum(np.abs(m_prev), np.abs(m_cur))
    bad = (mag > _BIG) | ((mag < _SMALL) & (mag > 0))
    if np.any(bad):
        s = np.where(bad, mag, 1.0)
        m_prev = m_prev / s
        m_cur = m_cur / s
        logscale = logscale + np.log(s)
    return m_prev, m_cur, logscale


def _weighted_log(n, y, weight=True):
    """Return (mantissa, logscale) with H_n(y) [e^{-y^2/2}] = mantissa * exp(logscale)."""
    y = np.asarray(y, dtype=float)
    logscale = -0.5 * y * y if weight else np.zeros_like(y)
    m_prev = np.ones_like(y)
    if n == 0:
        return m_prev, logscale
    m_cur = y.copy()
    for k in range(1, n):
        m_prev, m_cur = m_cur, (y * m_cur - m_prev) / (k + 1)
        if k % 8 == 0:
            m_prev, m_cur, logscale = _rescale(m_prev, m_cur, logscale)
    return m_cur, logscale


def _combine(mantissa, logscale):
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        out = np.sign(mantissa) * np.exp(np.log(np.abs(mantissa)) + logscale)
    return np.where(logscale == 0, mantissa, out)


def hermite_eval(n, x, ceiling=None):
    """H_n(x) in the 1/n! normalization, by the three-term recurrence."""
    n = check_order(n, ceiling)
    x = _as_finite(x)
    out = _combine(*_weighted_log(n, x, weight=False))
    return float(out) if out.ndim == 0 else out


def hermite_weighted(n, y, ceiling=None):
    """H_n(y) exp(-y^2/2), bounded in magnitude by ``cn_bound(n)``."""
    n = check_order(n, ceiling)
    y = _as_finite(y)
    out = _combine(*_weighted_log(n, y, weight=True))
    return float(out) if out.ndim == 0 else out


def log_abs_hermite_weighted(n, y, ceiling=None):
    """log |H_n(y) e^{-y^2/2}| and its sign, usable far beyond double range."""
    n = check_order(n, ceiling)
    y = _as_finite(y)
    m, ls = _weighted_log(n, y, weight=True)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(m)) + ls, np.sign(m)


def iter_hermite_functions(y, n_max, ceiling=None):
    """Yield ``(n, psi_n(y))`` for n = 0..n_max.

    psi_n(y) = sqrt(n!) H_n(y) e^{-y^2/2} = He_n(y) e^{-y^2/2} / sqrt(n!) are the
    orthonormal-weight Hermite functions; they stay O(1) for every n, which is
    the form the Watanabe series need (n! H_n^2 e^{-y^2} = psi_n^2).
    """
    n_max = check_order(n_max, ceiling)
    y = _as_finite(y)
    logscale = -0.5 * y * y
    m_prev = np.ones_like(y)
    yield 0, _combine(m_prev, logscale)
    if n_max == 0:
        return
    m_cur = y.copy()
    yield 1, _combine(m_cur, logscale)
    for k in range(1, n_max):
        m_prev, m_cur = m_cur, (y * m_cur - math.sqrt(k) * m_prev) / math.sqrt(k + 1)
        m_prev, m_cur, logscale = _rescale(m_prev, m_cur, logscale)
        yield k + 1, _combine(m_cur, logscale)


def hermite_function_table(y, n_max, ceiling=None):
    """Array of shape (n_max + 1,) + y.shape holding psi_n(y)."""
    y = _as_finite(y)
    out = np.empty((int(n_max) + 1,) + y.shape)
    for n, psi in iter_hermite_functions(y, n_max, ceiling):
        out[n] = psi
    return out


def log_cn_bound(n):
    n = np.asarray(n, dtype=float)
    return (0.5 * n * math.log(2.0) + math.log(2.0 / math.pi)
            - special.gammaln(n + 1.0) + special.gammaln(0.5 * (n + 1.0)))


def cn_bound(n, ceiling=None):
    """c_n = 2^{n/2} (2 / (n! pi)) Gamma((n+1)/2), evaluated through log-Gamma."""
    n = check_order(n, ceiling)
    return float(np.exp(log_cn_bound(n)))


def oscillatory_weighted(n, y, constant="exact"):
    """H_n(y) e^{-y^2/2} through its Fourier-type integral representation.

    Evaluates  k_n (-1)^{floor(n/2)} 2^{n/2} / n! * int_0^inf u^n e^{-u^2} g(u y sqrt 2) du
    with g = cos for even n and sin for odd n.  ``constant="exact"`` uses
    k_n = 2/sqrt(pi), which reproduces the weighted polynomial;
    ``constant="pi"`` uses 2/pi, the value from which ``cn_bound`` is built and
    which undershoots by exactly sqrt(pi).
    """
    n = check_order(n)
    y = float(y)
    g = math.cos if n % 2 == 0 else math.sin
    val, _ = integrate.quad(lambda u: u**n * math.exp(-u * u) * g(u * y * math.sqrt(2.0)),
                            0.0, math.inf, limit=400, epsabs=1e-14, epsrel=1e-12)
    k = 2.0 / math.sqrt(math.pi) if constant == "exact" else 2.0 / math.pi
    sign = -1.0 if (n // 2) % 2 else 1.0
    return sign * 2.0 ** (0.5 * n) * k * val / math.factorial(n)


def gauss_kernel(params, x):
    """Product Gaussian density prod_i (2 pi s)^{-1/2} exp(-x_i^2 / (2 s))."""
    if not isinstance(params, GaussKernelParams):
        params = GaussKernelParams(*params) if isinstance(params, tuple) else GaussKernelParams(params)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[-1] != params.dimension:
        raise DomainError(f"expected a point of dimension {params.dimension}, got {x.shape[-1]}")
    s = params.variance
    val = np.prod(np.exp(-x * x / (2.0 * s)) / math.sqrt(2.0 * math.pi * s), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def gauss_density(variance, x):
    """Vectorized 1-d kernel p_s(x); no dimension bookkeeping."""
    variance = np.asarray(variance, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x / (2.0 * variance)) / np.sqrt(2.0 * math.pi * variance)


def normalized_hermite_table(x, n_max):
    """Rows He_n(x) / sqrt(n!) for n = 0..n_max (no Gaussian weight).

    These are orthonormal under the standard normal law, which makes them the
    natural basis for chaos expansions evaluated on sampled Gaussians.
    """
    n_max = check_order(n_max)
    x = _as_finite(x)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = x
    for k in range(1, n_max):
        out[k + 1] = (x * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out
