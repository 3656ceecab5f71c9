"""Chaos coefficients of delta(x - B_s), their Fourier transforms, and pairings.

With R = R(s) and y = x / sqrt(R) the delta coefficients are

    a_n^x(s) = R^{-n/2} p_R(x) H_n(y),

and multiple integrals of indicator tensors evaluate as
I_n(1_{[0,s]}^{(x) n}) = R^{n/2} He_n(B_s / sqrt(R)) = n! R^{n/2} H_n(B_s / sqrt(R)).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, special

from . import rng
from .errors import DomainError
from .gaussian_model import variance_fn
from .hermite_gauss import (check_order, gauss_density, hermite_eval, log_abs_hermite_weighted,
                            normalized_hermite_table)
from .quadrature import composite


@dataclass
class ChaosCoefficientSet:
    x: float
    variance: float
    max_order: int
    coeffs: np.ndarray


@dataclass
class FourierChaosCoefficientSet:
    x: float
    variance: float
    max_order: int
    coeffs: np.ndarray


def _check_variance(variance):
    if not variance > 0:
        raise DomainError(f"variance must be positive (integrate from s > 0), got {variance}")


def delta_coefficient(n, x, variance):
    """a_n^x = R^{-n/2} p_R(x) H_n(x / sqrt R), assembled in log space."""
    n = check_order(n)
    _check_variance(variance)
    y = np.asarray(x, dtype=float) / math.sqrt(variance)
    logabs, sign = log_abs_hermite_weighted(n, y)
    with np.errstate(under="ignore"):
        val = sign * np.exp(logabs - 0.5 * (n + 1) * math.log(variance) - 0.5 * math.log(2 * math.pi))
    return float(val) if np.ndim(val) == 0 else val


def delta_coefficients(x, variance, n_max):
    coeffs = np.array([delta_coefficient(n, x, variance) for n in range(int(n_max) + 1)])
    return ChaosCoefficientSet(float(x), float(variance), int(n_max), coeffs)


def fourier_coefficient(n, x, variance):
    """Fourier transform of x' -> a_n^{x'}(s) at frequency x: e^{-x^2 R/2} (-i)^n x^n / n!."""
    n = check_order(n)
    if variance < 0:
        raise DomainError(f"variance must be non-negative, got {variance}")
    x = float(x)
    if x == 0.0:
        mag = 1.0 if n == 0 else 0.0
    else:
        mag = math.exp(-0.5 * x * x * variance + n * math.log(abs(x)) - math.lgamma(n + 1))
    if x < 0 and n % 2:
        mag = -mag
    return mag * (-1j) ** n


def fourier_coefficients(x, variance, n_max):
    coeffs = np.array([fourier_coefficient(n, x, variance) for n in range(int(n_max) + 1)])
    return FourierChaosCoefficientSet(float(x), float(variance), int(n_max), coeffs)


def fourier_tail_bound(n_max, x, variance):
    """sum_{n > n_max} |x|^n / n! e^{-x^2 R / 2}, exactly, via the Poisson tail."""
    lam = abs(float(x))
    if lam == 0.0:
        return 0.0
    return float(math.exp(lam - 0.5 * lam * lam * variance) * special.gammainc(n_max + 1, lam))


def choose_n_max(x, variance, tol=1e-12, ceiling=2000):
    """Smallest order whose Fourier-coefficient tail is below ``tol``."""
    for n in range(ceiling + 1):
        if fourier_tail_bound(n, x, variance) < tol:
            return n
    raise DomainError(f"no truncation order up to {ceiling} reaches tol={tol}")


def numeric_fourier_transform(n, xi, variance, width=40.0, panels=400, nodes=20):
    """int e^{-i xi x'} a_n^{x'} dx' over |x'| <= width * sigma by composite Gauss-Legendre."""
    sigma = math.sqrt(variance)
    xs, ws = composite(np.linspace(-width * sigma, width * sigma, panels + 1), nodes)
    a = delta_coefficient(n, xs, variance)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    phase = np.exp(-1j * np.outer(xi, xs))
    out = phase @ (ws * a)
    return out if out.size > 1 else complex(out[0])


# ---------------------------------------------------------------------------
# Multiple integrals on sampled paths
# ---------------------------------------------------------------------------

def multiple_integral_on_path(n, s, ensemble, component=0):
    """I_n(1_{[0,s]}^{(x) n}) for every path of ``ensemble``.

    Raises GridError when ``s`` is not a grid point (no interpolation).
    """
    n = check_order(n)
    b = ensemble.at(s, component)
    if n == 0:
        return np.ones_like(b)
    R = variance_fn(ensemble.spec, component, s)
    _check_variance(R)
    return math.factorial(n) * R ** (0.5 * n) * hermite_eval(n, b / math.sqrt(R))


def delta_series_terms(x, s, ensemble, component, n_max):
    """Array (n_max + 1, n_paths) of a_n^x(s) I_n(1_{[0,s]}^{(x) n})."""
    b = ensemble.at(s, component)
    R = variance_fn(ensemble.spec, component, s)
    _check_variance(R)
    sd = math.sqrt(R)
    poly = normalized_hermite_table(b / sd, n_max)             # He_n(b)/sqrt(n!)
    y = x / sd
    # a_n I_n = p_R(x) H_n(y) He_n(b) = p_R(x) [He_n(y)/sqrt n!] [He_n(b)/sqrt n!]
    coef = normalized_hermite_table(np.array(y), n_max) * float(gauss_density(R, x))
    return coef[:, None] * poly


def delta_series_eval(x, s, ensemble, component, n_max):
    """Partial chaos sum sum_{n <= n_max} a_n^x(s) I_n(...) per path."""
    return delta_series_terms(x, s, ensemble, component, n_max).sum(axis=0)


# ---------------------------------------------------------------------------
# Stroock pairing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianBump:
    """phi(x) = amplitude * exp(-(x - mean)^2 / (2 sd^2)); the default is the N(0,1) density."""

    mean: float = 0.0
    sd: float = 1.0
    amplitude: float = 1.0 / math.sqrt(2.0 * math.pi)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(-0.5 * ((x - self.mean) / self.sd) ** 2)


@dataclass
class PairingReport:
    n_max: int
    n_paths: int
    seed: int
    gap_estimate: float
    gap_stderr: float
    per_order_contributions: list
    insufficient_sample: bool = False
    exact_tail: float = float("nan")
    mean_check: float = float("nan")
    coefficient_crosscheck: float = float("nan")
    dimension: int = 1

    def to_dict(self):
        return asdict(self)

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def pairing_coefficients(phi, variance, n_max, nodes=160):
    """Coefficients of the truncated pairing in the orthonormal Hermite basis.

    Returns beta_n = sqrt(n!) int phi(sigma y) p_1(y) H_n(y) dy, so that the
    truncated pairing is sum_n beta_n He_n(W/sigma)/sqrt(n!) and its L^2 mass
    at order n is beta_n^2.
    """
    sigma = math.sqrt(variance)
    y, w = special.roots_hermitenorm(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    table = normalized_hermite_table(y, n_max)
    return table @ (w * phi(sigma * y))


def _pairing_quad(phi, variance, n):
    sigma = math.sqrt(variance)
    he = special.eval_hermitenorm
    f = lambda y: float(phi(sigma * y)) * math.exp(-0.5 * y * y) / math.sqrt(2 * math.pi) * he(n, y)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, -12.0, 12.0, limit=200, epsabs=1e-14)
    return val / math.sqrt(math.factorial(n))


def stroock_pairing_test(phi, variance=1.0, n_max=20, n_paths=100_000, seed=0,
                         target_precision=1e-3, workers=None):
    """L^2(Omega) gap between phi(W(h)) and the order-n_max truncated pairing.

    ``phi`` is a callable of one variable, or a tuple of callables for the
    product test function phi_1(x_1) ... phi_d(x_d) driven by d independent
    Gaussians with the same variance |h|^2.  The gap is a Monte Carlo estimate
    of sqrt(E[(phi(W) - sum_n ...)^2]); ``exact_tail`` is the chaos mass above
    n_max from the coefficients themselves, an independent oracle for it.
    """
    _check_variance(variance)
    n_max = check_order(n_max)
    phis = tuple(phi) if isinstance(phi, (tuple, list)) else (phi,)
    d = len(phis)
    sigma = math.sqrt(variance)
    full = max(n_max, 60)
    betas = [pairing_coefficients(p, variance, full) for p in phis]
    check = max(abs(_pairing_quad(phis[0], variance, n) - betas[0][n]) for n in range(min(n_max, 10) + 1))

    # exact chaos mass by total order (product of per-component orthonormal expansions)
    mass = np.ones(1)
    for b in betas:
        mass = np.convolve(mass, b**2)
    total_mass = float(np.prod([np.sum(b**2) for b in betas]))
    if d == 1:
        kept = float(np.sum(betas[0][: n_max + 1] ** 2))
    else:
        kept = float(np.prod([np.sum(b[: n_max + 1] ** 2) for b in betas]))
    exact_tail = math.sqrt(max(total_mass - kept, 0.0))

    target = np.ones(n_paths)
    approx = np.ones(n_paths)
    for k, (p, b) in enumerate(zip(phis, betas)):
        z = rng.standard_normals(seed, rng.PAIRING, k, n_paths, 1, workers)[:, 0]
        target *= p(sigma * z)
        approx *= b[: n_max + 1] @ normalized_hermite_table(z, n_max)
    d2 = (target - approx) ** 2
    m2 = float(d2.mean())
    se2 = float(d2.std(ddof=1) / math.sqrt(n_paths))
    gap = math.sqrt(m2)
    gap_se = se2 / (2.0 * gap) if gap > 0 else se2
    return PairingReport(
        n_max=n_max, n_paths=int(n_paths), seed=int(seed), gap_estimate=gap, gap_stderr=gap_se,
        per_order_contributions=[float(v) for v in mass[: n_max + 1]],
        insufficient_sample=bool(gap_se > target_precision),
        exact_tail=exact_tail, mean_check=float(target.mean() - approx.mean()),
        coefficient_crosscheck=float(check), dimension=d)
