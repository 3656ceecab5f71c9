"""Watanabe-space norms of delta(x - B_s) and of the current xi(x).

Canonical convention: for a chaos expansion F = sum_n I_n(f_n),

    ||F||^2_{2,beta} = sum_n (n + 1)^beta ||I_n(f_n)||^2 .

"F in D^{-alpha,2}" corresponds to beta = -alpha.  The current's chaos of
order n + 1 carries weight (n + 2)^beta, so the series for xi(x) take the
exponent ``alpha`` of the (n+2)^alpha weight directly.

All chaos norms are assembled from psi_n(y) = sqrt(n!) H_n(y) e^{-y^2/2}; the
identity n! (p_s(x) H_n(x/sqrt s))^2 = psi_n(x/sqrt s)^2 / (2 pi s) removes the
factorials.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .classify import SeriesVerdict, fit_power_law, last_decade, series_verdict
from .errors import DomainError
from .hermite_gauss import check_order, iter_hermite_functions
from .quadrature import (QuadratureScheme, composite, geometric_edges, left_singular)


@dataclass
class WatanabeSeries:
    alpha: float
    terms: np.ndarray
    partial_sums: np.ndarray
    classification: SeriesVerdict
    fitted_decay_exponent: float
    r_squared: float = float("nan")
    fit_range: tuple = (0, 0)
    beta: float = float("nan")
    kind: str = ""
    parameters: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["terms"] = [float(t) for t in self.terms]
        d["partial_sums"] = [float(t) for t in self.partial_sums]
        d["classification"] = self.classification.value
        d["fit_range"] = list(self.fit_range)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["n", "t_n", "partial_sum"])
            for n, (t, s) in enumerate(zip(self.terms, self.partial_sums)):
                wr.writerow([n, repr(float(t)), repr(float(s))])


def weighted_terms(beta, chaos_norms, first_order=0):
    """(n + 1)^beta ||I_n||^2 for chaos orders n = first_order, first_order + 1, ..."""
    chaos_norms = np.asarray(chaos_norms, dtype=float)
    orders = np.arange(first_order, first_order + len(chaos_norms))
    return (orders + 1.0) ** beta * chaos_norms


def _assemble(alpha, terms, kind, beta, params, pair=False, n_lo=None):
    terms = np.asarray(terms, dtype=float)
    n_max = len(terms) - 1
    lo, hi = last_decade(n_max, n_min=2) if n_lo is None else (n_lo, n_max)
    if pair:
        # even/odd orders oscillate in antiphase; their sums are smooth in n
        m = (len(terms) // 2) * 2
        sums = terms[:m:2] + terms[1:m:2]
        idx = np.arange(0, m, 2) + 0.5
        keep = (idx >= lo) & (idx <= hi)
        fit = fit_power_law(idx[keep], sums[keep])
    else:
        n = np.arange(len(terms))
        keep = (n >= lo) & (n <= hi)
        fit = fit_power_law(n[keep], terms[keep])
    return WatanabeSeries(
        alpha=float(alpha), terms=terms, partial_sums=np.cumsum(terms),
        classification=series_verdict(fit), fitted_decay_exponent=fit.slope,
        r_squared=fit.r_squared, fit_range=(int(lo), int(hi)), beta=float(beta), kind=kind,
        parameters=params)


# ---------------------------------------------------------------------------
# delta(x - B_s)
# ---------------------------------------------------------------------------

def delta_chaos_norms(x, s, n_max):
    """||I_n(a_n^x(s) 1^{(x) n})||^2 = n! a_n^2 s^n = psi_n(x/sqrt s)^2 / (2 pi s)."""
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    y = np.array(x / math.sqrt(s))
    out = np.empty(check_order(n_max) + 1)
    for n, psi in iter_hermite_functions(y, n_max):
        out[n] = float(psi) ** 2 / (2 * math.pi * s)
    return out


def watanabe_delta_norm(x, s, alpha, n_max=1000):
    """Series for ||delta(x - B_s)||^2 in D^{-alpha,2}: terms (n+1)^{-alpha} ||I_n||^2.

    Convergent for alpha > 1/2.  The fit uses sums of consecutive even/odd
    orders, which removes the parity oscillation of psi_n(y)^2.
    """
    norms = delta_chaos_norms(x, s, n_max)
    beta = -float(alpha)
    return _assemble(alpha, weighted_terms(beta, norms), "delta", beta,
                     {"x": x, "s": s, "n_max": n_max}, pair=True)


# ---------------------------------------------------------------------------
# Brownian current
# ---------------------------------------------------------------------------

def current_bm_chaos_norms(x, a, T, n_max, panels=400, q=8):
    """n! int_a^T (p_s(x) H_n(x/sqrt s))^2 ds for n = 0..n_max.

    With y = x / sqrt(s) the integral is (1/pi) int psi_n(y)^2 dy / y over
    y in [|x|/sqrt T, |x|/sqrt a].
    """
    if not a > 0:
        raise DomainError("the time integral must start at a > 0: the integrand is "
                          "singular at s = 0")
    if not a < T:
        raise DomainError("need a < T")
    x = abs(float(x))
    if x == 0.0:
        # psi_n(0)^2 / (2 pi s) integrates to log(T/a) psi_n(0)^2 / (2 pi)
        out = np.empty(check_order(n_max) + 1)
        for n, psi in iter_hermite_functions(np.array(0.0), n_max):
            out[n] = float(psi) ** 2 * math.log(T / a) / (2 * math.pi)
        return out
    y, w = composite(np.linspace(x / math.sqrt(T), x / math.sqrt(a), panels + 1), q)
    w = w / (math.pi * y)
    out = np.empty(check_order(n_max) + 1)
    for n, psi in iter_hermite_functions(y, n_max):
        out[n] = np.dot(w, psi * psi)
    return out


def watanabe_current_bm(x, a=0.1, T=1.0, alpha=-0.6, n_max=1000):
    """Series sum_n (n+2)^alpha n! int_a^T (p_s(x) H_n(x/sqrt s))^2 ds; convergent iff alpha < -1/2."""
    norms = current_bm_chaos_norms(x, a, T, n_max)
    return _assemble(alpha, (np.arange(len(norms)) + 2.0) ** alpha * norms, "current_bm", alpha,
                     {"x": x, "a": a, "T": T, "n_max": n_max})


# ---------------------------------------------------------------------------
# fBm: R(1, z) and the covariance-power integrals
# ---------------------------------------------------------------------------

def _check_h(H):
    if not 0.5 < H < 1.0:
        raise DomainError(f"Hurst index must lie in (1/2, 1), got {H}")


def r1z(z, H, one_minus_z=None):
    """R(1, z) = (1 + z^{2H} - (1 - z)^{2H}) / 2 without cancellation at small z.

    ``one_minus_z`` may carry 1 - z exactly when z is within rounding of 1.
    """
    z = np.asarray(z, dtype=float)
    if one_minus_z is None:
        return 0.5 * (z ** (2 * H) - np.expm1(2 * H * np.log1p(-z)))
    d = np.asarray(one_minus_z, dtype=float)
    small = z < 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        near0 = 0.5 * (z ** (2 * H) - np.expm1(2 * H * np.log1p(-z)))
        near1 = 0.5 * (z ** (2 * H) + 1.0 - d ** (2 * H))
    return np.where(small, near0, near1)


def log_rho(z, H, one_minus_z=None):
    """log(R(1, z) / z^H); rho < 1 on (0, 1) and rho(1) = 1."""
    z = np.asarray(z, dtype=float)
    return np.log(r1z(z, H, one_minus_z)) - H * np.log(z)


@dataclass(frozen=True)
class ZRule:
    """Nodes z on (0, 1), the exact complements 1 - z, and weights."""

    z: np.ndarray
    one_minus: np.ndarray
    w: np.ndarray


def z_rule(H, q=12, sing_near_one=False, floor=1e-14, sliver_power=None, ratio=2.0):
    """Quadrature on (0, 1) graded geometrically towards both endpoints.

    With ``sing_near_one`` the returned weights already contain the factor
    (1 - z)^{2H-2}: on [1/2, 1) the rule comes from the substitution
    w = (1 - z)^{2H-1}, under which that endpoint singularity disappears.
    Near z = 0 the first sliver [0, floor] uses a Gauss-Jacobi rule for the
    power z^p the integrand behaves like there (``sliver_power``, default -H).
    """
    p = -H if sliver_power is None else sliver_power
    zl, wl = composite(geometric_edges(floor, 0.5, ratio), q)
    n0, w0 = left_singular(0.0, floor, p, q)
    z_lo = np.concatenate([n0, zl])
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        w0 = np.nan_to_num(w0 / n0**p, nan=0.0, posinf=0.0)   # 0/0 only where the integrand is 0 too
    w_lo = np.concatenate([w0, wl])
    if sing_near_one:
        a = 2 * H - 1
        w_lo = w_lo * (1 - z_lo) ** (2 * H - 2)
        wmax = 0.5**a
        ww, wwt = composite(np.concatenate([[0.0], geometric_edges(wmax * 1e-12, wmax, ratio)]), q)
        d_hi = ww ** (1.0 / a)
        w_hi = wwt / a
    else:
        d_hi, w_hi = composite(np.concatenate([[0.0], geometric_edges(1e-12, 0.5, ratio)]), q)
    return ZRule(np.concatenate([z_lo, 1.0 - d_hi]), np.concatenate([1.0 - z_lo, d_hi]),
                 np.concatenate([w_lo, w_hi]))


def edd_integral(H, n, scheme=None):
    """int_0^1 R(1,z)^n z^{-Hn} (1 - z)^{2H-2} z^{-H} dz."""
    _check_h(H)
    if n < 1:
        raise DomainError("n must be >= 1")
    q = (scheme or QuadratureScheme()).nodes_per_panel
    # rho(z) ~ H z^{1-H} as z -> 0
    zr = z_rule(H, q, sing_near_one=True, sliver_power=(1 - H) * n - H)
    f = np.exp(n * log_rho(zr.z, H, zr.one_minus)) * zr.z ** (-H)
    return float(np.dot(zr.w, f))


def covariance_power_integral(H, n, T=1.0, scheme=None):
    """int_0^T int_0^T R(u,v)^{n-1} u^{-Hn} v^{-Hn} du dv.

    With v = z u this is 2 T^{2-2H}/(2-2H) int_0^1 rho(z)^{n-1} z^{-H} dz,
    rho = R(1,z)/z^H.
    """
    _check_h(H)
    if n < 1:
        raise DomainError("n must be >= 1")
    q = (scheme or QuadratureScheme()).nodes_per_panel
    zr = z_rule(H, q, sing_near_one=False, sliver_power=(1 - H) * (n - 1) - H)
    f = np.exp((n - 1) * log_rho(zr.z, H, zr.one_minus)) * zr.z ** (-H)
    return float(2 * T ** (2 - 2 * H) / (2 - 2 * H) * np.dot(zr.w, f))


# ---------------------------------------------------------------------------
# fBm current: A(n), B(n)
# ---------------------------------------------------------------------------

def _psi_stream(y, n_max):
    """psi_0..psi_{n_max} at the points y; a plain recurrence when no underflow can occur."""
    if np.max(y) < 37.0:
        prev = np.exp(-0.5 * y * y)
        yield 0, prev
        if n_max == 0:
            return
        cur = y * prev
        yield 1, cur
        for k in range(1, n_max):
            prev, cur = cur, (y * cur - math.sqrt(k) * prev) / math.sqrt(k + 1)
            yield k + 1, cur
    else:
        yield from iter_hermite_functions(y, n_max)


@dataclass
class FbmTerms:
    """(n+1)! A(n) and (n+1)! B(n) for n = 0..n_max (alpha-independent)."""

    H: float
    x: float
    T: float
    scaled_A: np.ndarray
    scaled_B: np.ndarray


_TERM_CACHE = {}


def fbm_scaled_terms(H, x, T=1.0, n_max=200, scheme=None):
    """Compute (n+1)! A(n) and (n+1)! B(n) for all n <= n_max in one recurrence sweep.

    Coordinates: v = z u with u >= v (the integrands are symmetric, factor 2).
    By self-similarity every u-dependence except the Hermite functions reduces
    to du/u, and with y = x u^{-H}:

      (n+1)! A(n) = 2 H(2H-1)/(2 pi) int dy/(H y) int dz (1-z)^{2H-2} z^{-H} rho^n psi_n(y) psi_n(y z^{-H})
      (n+1)! B(n) = 2 n (H(2H-1))^2/(2 pi) int dy/(H y) int dz z^{-2H} G1 G2 rho^{n-1} psi_n(y) psi_n(y z^{-H})

    with rho = R(1,z)/z^H, G1 = (z^{2H-1} + (1-z)^{2H-1})/(2H-1) and
    G2 = (1 - (1-z)^{2H-1})/(2H-1).
    """
    _check_h(H)
    x = abs(float(x))
    if x == 0.0:
        raise DomainError("x = 0 gives a logarithmically divergent u-integral at u = 0")
    scheme = scheme or QuadratureScheme()
    key = (H, x, T, n_max, scheme.panel_count, scheme.nodes_per_panel, scheme.refinement_level)
    if key in _TERM_CACHE:
        return _TERM_CACHE[key]
    q = min(scheme.nodes_per_panel, 8)
    lev = scheme.refinement_level
    a = 2 * H - 1
    alpha = H * a
    # |psi_n(y)| <= e^{-y^2/4}, so the product psi_n(y) psi_n(y z^{-H}) is below
    # e^{-y^2/2}; beyond y_hi everything is under e^{-40} relative to y_lo.
    y_lo = x * T ** (-H)
    y_hi = math.sqrt(y_lo * y_lo + 80.0)
    yv_hi = math.sqrt(y_lo * y_lo + 160.0)
    # psi_n oscillates with frequency ~ sqrt(2n) in y
    width = min(0.25, 2.0 / math.sqrt(2 * n_max + 1)) / 2**lev
    n_pan = max(scheme.panel_count, int(math.ceil((y_hi - y_lo) / width)))
    y, wy = composite(np.linspace(y_lo, y_hi, n_pan + 1), q)
    wy = wy / (H * y)

    ratio = 2.0 ** (0.5 / 2**lev)
    ra = z_rule(H, q, sing_near_one=True, ratio=ratio)
    rb = z_rule(H, q, sing_near_one=False, ratio=ratio)
    zA, zB = ra.z, rb.z
    lrA, lrB = log_rho(zA, H, ra.one_minus), log_rho(zB, H, rb.one_minus)
    kerA = ra.w * zA ** (-H)
    G1 = (zB**a + rb.one_minus**a) / a
    G2 = (1.0 - rb.one_minus**a) / a
    kerB = rb.w * zB ** (-2 * H) * G1 * G2
    # drop points where psi_n(y z^{-H}) is negligible for every n <= n_max
    yvA = y[:, None] * zA[None, :] ** (-H)
    yvB = y[:, None] * zB[None, :] ** (-H)
    mA = yvA <= yv_hi
    mB = yvB <= yv_hi
    SA = np.empty(n_max + 1)
    SB = np.empty(n_max + 1)
    streamA = _psi_stream(yvA[mA], n_max)
    streamB = _psi_stream(yvB[mB], n_max)
    rowsA = np.nonzero(mA)[0]
    rowsB = np.nonzero(mB)[0]
    colsA = np.nonzero(mA)[1]
    colsB = np.nonzero(mB)[1]
    for (n, pu), (_, pa), (_, pb) in zip(_psi_stream(y, n_max), streamA, streamB):
        fa = kerA[colsA] * np.exp(n * lrA[colsA]) * pa
        SA[n] = np.dot(wy * pu, np.bincount(rowsA, fa, minlength=len(y)))
        if n == 0:
            SB[n] = 0.0
            continue
        fb = kerB[colsB] * np.exp((n - 1) * lrB[colsB]) * pb
        SB[n] = np.dot(wy * pu, np.bincount(rowsB, fb, minlength=len(y)))
    scaled_A = 2 * alpha / (2 * math.pi) * SA
    scaled_B = 2 * alpha**2 / (2 * math.pi) * np.arange(n_max + 1) * SB
    out = FbmTerms(H, x, T, scaled_A, scaled_B)
    _TERM_CACHE[key] = out
    return out


def watanabe_current_fbm_A(n, H, x, T=1.0, scheme=None, scaled=False):
    """A(n); with ``scaled`` the factorial-free (n+1)! A(n) (A(n) itself underflows for large n)."""
    n = check_order(n)
    v = fbm_scaled_terms(H, x, T, max(n, 1), scheme).scaled_A[n]
    return float(v) if scaled else float(v / math.factorial(n + 1))


def watanabe_current_fbm_B(n, H, x, T=1.0, scheme=None, scaled=False):
    """B(n) (zero at n = 0); ``scaled`` as in ``watanabe_current_fbm_A``."""
    n = check_order(n)
    if n == 0:
        return 0.0
    v = fbm_scaled_terms(H, x, T, n, scheme).scaled_B[n]
    return float(v) if scaled else float(v / math.factorial(n + 1))


def fbm_threshold(H):
    """Critical value of -alpha: 3/2 - 1/(2H)."""
    return 1.5 - 0.5 / H


def watanabe_current_fbm(x, H, T=1.0, alpha=-0.95, n_max=200, scheme=None):
    """Series sum_n (n+2)^alpha (n+1)! (A(n) + B(n)); convergent iff -alpha > 3/2 - 1/(2H)."""
    t = fbm_scaled_terms(H, x, T, n_max, scheme)
    terms = (np.arange(n_max + 1) + 2.0) ** alpha * (t.scaled_A + t.scaled_B)
    return _assemble(alpha, terms, "current_fbm", alpha,
                     {"x": x, "H": H, "T": T, "n_max": n_max, "threshold_minus_alpha": fbm_threshold(H)})
