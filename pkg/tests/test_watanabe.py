import csv
import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from stochcurrents.classify import SeriesVerdict, fit_power_law
from stochcurrents.errors import DomainError
from stochcurrents.quadrature import QuadratureScheme
from stochcurrents.watanabe import (current_bm_chaos_norms, delta_chaos_norms, edd_integral,
                                    fbm_scaled_terms, fbm_threshold, covariance_power_integral, log_rho,
                                    r1z, watanabe_current_bm, watanabe_current_fbm,
                                    watanabe_current_fbm_A, watanabe_current_fbm_B,
                                    watanabe_delta_norm, weighted_terms)

# (n+1)! A(n) and (n+1)! B(n) at H = 0.75, x = 1, T = 1.  Oracle: direct double
# integrals over (u, v) in [0, 1]^2 with the closed-form G factors and adaptive
# quadrature, independent of the z-substitution used by the implementation.
SCALED_A = {0: 0.022277376767163293, 1: 0.039614464936695126, 2: 0.012270882952969664,
            5: 0.0037874708370275807}
SCALED_B = {1: 0.018834702260082416, 2: 0.011718696845316122, 5: 0.005046696889102726}
# int_0^1 rho(z)^n (1 - z)^{2H-2} z^{-H} dz and the covariance-power double integral,
# evaluated with mpmath in the delta = 1 - z form at 30 digits.
EDD = {(0.75, 1): 3.0, (0.75, 10): 1.2016043893333626, (0.6, 5): 4.0567026960389105,
       (0.9, 50): 0.41662419709079823}
COVPOW = {(0.75, 1): 16.0, (0.75, 10): 1.6862419627577487, (0.6, 5): 1.2531869805536273,
         (0.9, 50): 2.6403426457976584}


# ---------------------------------------------------------------------------
# delta(x - B_s)
# ---------------------------------------------------------------------------

def test_delta_examples():
    assert watanabe_delta_norm(1.0, 1.0, 0.6).classification is SeriesVerdict.CONVERGENT
    assert watanabe_delta_norm(1.0, 1.0, 0.4).classification is SeriesVerdict.DIVERGENT


@pytest.mark.parametrize("x,s", [(0.0, 1.0), (1.0, 0.5), (-2.0, 3.0)])
def test_delta_chaos_norms_closed_form(x, s):
    """n! a_n^2 s^n with a_n = p_s(x) H_n(x/sqrt s)/s^{n/2}... written via He_n / n!."""
    norms = delta_chaos_norms(x, s, 12)
    y = x / math.sqrt(s)
    for n in range(13):
        p = math.exp(-x * x / (2 * s)) / math.sqrt(2 * math.pi * s)
        a_n = p * special.eval_hermitenorm(n, y) / math.factorial(n) / s ** (n / 2)
        assert norms[n] == pytest.approx(math.factorial(n) * a_n**2 * s**n, rel=1e-10, abs=1e-300)


def test_delta_norm_sum_weighting():
    r = watanabe_delta_norm(0.5, 1.0, 0.7, n_max=50)
    expected = (np.arange(51) + 1.0) ** -0.7 * delta_chaos_norms(0.5, 1.0, 50)
    np.testing.assert_allclose(r.terms, expected, rtol=1e-14)
    np.testing.assert_allclose(r.partial_sums, np.cumsum(expected), rtol=1e-14)


def test_delta_fit_slope_near_minus_half_minus_alpha():
    # psi_n(y)^2 averages to ~ n^{-1/2}: terms ~ n^{-1/2 - alpha}
    r = watanabe_delta_norm(1.0, 1.0, 0.6, n_max=2000)
    assert r.fitted_decay_exponent == pytest.approx(-1.1, abs=0.05)


# ---------------------------------------------------------------------------
# Brownian current
# ---------------------------------------------------------------------------

def test_current_bm_examples():
    assert watanabe_current_bm(1.0, 0.1, 1.0, -0.6).classification is SeriesVerdict.CONVERGENT
    assert watanabe_current_bm(1.0, 0.1, 1.0, -0.3).classification is SeriesVerdict.DIVERGENT
    with pytest.raises(DomainError):
        watanabe_current_bm(1.0, 0.0)
    with pytest.raises(DomainError):
        watanabe_current_bm(1.0, -0.1)


@pytest.mark.parametrize("x,a,T", [(1.0, 0.1, 1.0), (0.3, 0.05, 2.0), (2.0, 0.5, 1.5)])
def test_current_bm_order_zero_exponential_integral(x, a, T):
    # int_a^T p_s(x)^2 ds = (E1(x^2/T) - E1(x^2/a)) / (2 pi)
    exact = (special.exp1(x * x / T) - special.exp1(x * x / a)) / (2 * math.pi)
    assert current_bm_chaos_norms(x, a, T, 3)[0] == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("n", [1, 4, 9])
def test_current_bm_chaos_norm_mpmath(n):
    x, a, T = 0.8, 0.1, 1.0
    f = lambda s: mp.factorial(n) * (mp.npdf(x, 0, mp.sqrt(s)) * mp.hermite(n, x / mp.sqrt(2 * s))
                                     / (2 ** (mp.mpf(n) / 2) * mp.factorial(n))) ** 2
    exact = float(mp.quad(f, [a, T]))
    assert current_bm_chaos_norms(x, a, T, n)[n] == pytest.approx(exact, rel=1e-9)


def test_current_bm_at_origin():
    norms = current_bm_chaos_norms(0.0, 0.1, 1.0, 4)
    expected = [special.eval_hermitenorm(n, 0.0) ** 2 / math.factorial(n) * math.log(10) / (2 * math.pi) for n in range(5)]
    np.testing.assert_allclose(norms, expected, rtol=1e-12, atol=1e-300)


# ---------------------------------------------------------------------------
# fBm covariance helpers and the covariance-power integrals
# ---------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1 - 1e-6), st.floats(0.51, 0.99))
def test_r1z_matches_covariance(z, H):
    direct = 0.5 * (1 + z ** (2 * H) - (1 - z) ** (2 * H))
    assert r1z(z, H) == pytest.approx(direct, rel=1e-10, abs=1e-15)
    assert 0 < math.exp(log_rho(z, H)) <= 1 + 1e-15


def test_r1z_accurate_near_one():
    d = 1e-13
    z = 1 - d
    H = 0.75
    exact = float(0.5 * (1 + mp.mpf(z) ** (2 * H) - mp.mpf(d) ** (2 * H)))
    assert r1z(z, H, one_minus_z=d) == pytest.approx(exact, rel=1e-14)


@pytest.mark.parametrize("key", list(EDD))
def test_edd_frozen(key):
    assert edd_integral(*key) == pytest.approx(EDD[key], rel=1e-7)


@pytest.mark.parametrize("key", list(COVPOW))
def test_covariance_power_frozen(key):
    assert covariance_power_integral(*key) == pytest.approx(COVPOW[key], rel=1e-7)


def test_covariance_power_scales_with_horizon():
    assert covariance_power_integral(0.7, 6, T=2.0) == pytest.approx(2 ** (2 - 1.4) * covariance_power_integral(0.7, 6), rel=1e-12)


@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
def test_edd_monotone_and_rate(H):
    ns = np.arange(1, 201)
    vals = np.array([edd_integral(H, int(n)) for n in ns])
    assert np.all(np.diff(vals) <= 1e-12 * vals[:-1])
    # near z = 1: rho^n ~ exp(-n d^{2H}/2); the (1 - z)^{2H-2} weight gives n^{-(1 - 1/(2H))}
    scaled = vals * ns ** (1 - 1 / (2 * H))
    assert scaled.max() / scaled.min() < 3.0


def test_edd_errors():
    with pytest.raises(DomainError):
        edd_integral(0.5, 3)
    with pytest.raises(DomainError):
        edd_integral(0.7, 0)


# ---------------------------------------------------------------------------
# fBm current
# ---------------------------------------------------------------------------

def test_scaled_A_frozen(fbm_terms_075):
    for n, v in SCALED_A.items():
        assert fbm_terms_075.scaled_A[n] == pytest.approx(v, rel=1e-9)


def test_scaled_B_frozen(fbm_terms_075):
    for n, v in SCALED_B.items():
        assert fbm_terms_075.scaled_B[n] == pytest.approx(v, rel=1e-9)


def test_unscaled_accessors(fbm_terms_075):
    assert watanabe_current_fbm_A(5, 0.75, 1.0) == pytest.approx(SCALED_A[5] / math.factorial(6), rel=1e-9)
    assert watanabe_current_fbm_B(2, 0.75, 1.0, scaled=True) == pytest.approx(SCALED_B[2], rel=1e-9)
    assert watanabe_current_fbm_B(0, 0.75, 1.0) == 0.0


def test_terms_positive(fbm_terms_075):
    assert np.all(fbm_terms_075.scaled_A > 0)
    assert np.all(fbm_terms_075.scaled_B[1:] >= 0) and fbm_terms_075.scaled_B[0] == 0.0


def test_scaled_A_decay(fbm_terms_075):
    n = np.arange(20, 201)
    fit = fit_power_law(n, fbm_terms_075.scaled_A[20:])
    assert fit.slope == pytest.approx(-(1.5 - 0.5 / 0.75) - 0.0, abs=0.1)


def test_quadrature_refinement_stable():
    base = fbm_scaled_terms(0.75, 1.0, 1.0, 40)
    fine = fbm_scaled_terms(0.75, 1.0, 1.0, 40, QuadratureScheme(refinement_level=1))
    np.testing.assert_allclose(fine.scaled_A, base.scaled_A, rtol=1e-8)
    np.testing.assert_allclose(fine.scaled_B, base.scaled_B, rtol=1e-8)


def test_near_brownian_hurst_finite():
    t = fbm_scaled_terms(0.501, 1.0, 1.0, 20)
    assert np.all(np.isfinite(t.scaled_A)) and np.all(np.isfinite(t.scaled_B))
    assert np.all(t.scaled_A > 0)


def test_fbm_series_weights(fbm_terms_075):
    s = watanabe_current_fbm(1.0, 0.75, alpha=-0.9, n_max=200)
    expected = (np.arange(201) + 2.0) ** -0.9 * (fbm_terms_075.scaled_A + fbm_terms_075.scaled_B)
    np.testing.assert_allclose(s.terms, expected, rtol=1e-14)
    assert s.parameters["threshold_minus_alpha"] == pytest.approx(fbm_threshold(0.75))


def test_fbm_divergent_side():
    s = watanabe_current_fbm(1.0, 0.75, alpha=-0.7)
    # B(n) oscillates in n, so the fit quality can fall below the R^2 cut; the slope decides
    assert s.classification is not SeriesVerdict.CONVERGENT
    assert s.fitted_decay_exponent > -1.0


def test_fbm_rejects_origin_and_hurst_range():
    with pytest.raises(DomainError):
        fbm_scaled_terms(0.75, 0.0, 1.0, 10)
    with pytest.raises(DomainError):
        fbm_scaled_terms(1.0, 1.0, 1.0, 10)


def test_threshold_endpoints():
    assert fbm_threshold(0.5) == pytest.approx(0.5)
    assert fbm_threshold(1.0) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Conventions and export
# ---------------------------------------------------------------------------

def test_weight_convention():
    """(n + 1)^beta on chaos order n; beta = -alpha for D^{-alpha, 2}."""
    np.testing.assert_allclose(weighted_terms(2.0, [1, 1, 1]), [1, 4, 9])
    np.testing.assert_allclose(weighted_terms(-1.0, [1, 1], first_order=1), [0.5, 1 / 3])
    r = watanabe_delta_norm(1.0, 1.0, 0.8, n_max=10)
    assert r.beta == -0.8


def test_export_roundtrip(tmp_path):
    r = watanabe_current_bm(1.0, n_max=50)
    d = json.loads(r.to_json())
    assert d["classification"] == r.classification.value and len(d["terms"]) == 51
    p = tmp_path / "s.csv"
    r.to_csv(p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["n", "t_n", "partial_sum"]
    assert float(rows[10][1]) == r.terms[9] and float(rows[-1][2]) == r.partial_sums[-1]
