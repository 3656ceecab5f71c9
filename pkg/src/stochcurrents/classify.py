"""Finite/divergent verdicts from truncation ladders, and power-law tail fits."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

FINITE_TOL = 0.01
GROWTH_MIN = 1.10
GROWTH_LEVELS = 3


class Verdict(str, Enum):
    FINITE = "Finite"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


class SeriesVerdict(str, Enum):
    CONVERGENT = "Convergent"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


def ladder_verdict(values, finite_tol=FINITE_TOL, growth=GROWTH_MIN, growth_levels=GROWTH_LEVELS):
    """Classify a sequence of truncated values V_0, V_1, ... (each a finer truncation).

    Finite: the last two values agree to ``finite_tol`` relative.
    Divergent: each of the last ``growth_levels`` steps grew by more than ``growth``.
    """
    v = np.asarray(values, dtype=float)
    if len(v) >= 2 and np.all(np.isfinite(v[-2:])) and abs(v[-1] - v[-2]) <= finite_tol * abs(v[-1]):
        return Verdict.FINITE
    if len(v) > growth_levels:
        tail = v[-growth_levels - 1:]
        if np.all(tail > 0) and np.all(tail[1:] > growth * tail[:-1]):
            return Verdict.DIVERGENT
    if len(v) and not np.isfinite(v[-1]):
        return Verdict.DIVERGENT
    return Verdict.INCONCLUSIVE


def increment_exponent(values, window=5):
    """Local exponent e with increments V_{k+1} - V_k ~ 2^{-e k}.

    e > 0 means geometrically shrinking increments (a finite limit); e < 0
    means increments that grow, so the truncated values diverge.
    """
    v = np.asarray(values, dtype=float)
    dv = np.diff(v)[-window:]
    if len(dv) < 2 or np.any(dv <= 0):
        return float("nan")
    k = np.arange(len(dv))
    slope = np.polyfit(k, np.log2(dv), 1)[0]
    return float(-slope)


@dataclass
class RegularityClassification:
    exponent_r: float
    verdict: Verdict
    refinement_trace: list
    threshold_formula: float
    term: str = ""
    value: float = float("nan")
    increment_exponent: float = float("nan")
    parameters: dict = field(default_factory=dict)

    @property
    def resolved_verdict(self):
        """Protocol verdict, with Inconclusive settled by the sign of the increment exponent."""
        if self.verdict is not Verdict.INCONCLUSIVE or not math.isfinite(self.increment_exponent):
            return self.verdict
        return Verdict.FINITE if self.increment_exponent > 0 else Verdict.DIVERGENT

    def to_dict(self):
        d = asdict(self)
        d["verdict"] = self.verdict.value
        d["resolved_verdict"] = self.resolved_verdict.value
        d["refinement_trace"] = [[int(k), float(v)] for k, v in self.refinement_trace]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def extrapolated_limit(values, exponent):
    """Last value plus the geometric tail of increments shrinking like 2^{-exponent k}."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2 or not math.isfinite(exponent) or exponent <= 0:
        return float(v[-1])
    rho = 2.0 ** -exponent
    return float(v[-1] + (v[-1] - v[-2]) * rho / (1.0 - rho))


def classify_ladder(values, exponent_r, threshold, term="", parameters=None):
    values = [float(v) for v in values]
    verdict = ladder_verdict(values)
    e = increment_exponent(values)
    return RegularityClassification(
        exponent_r=float(exponent_r), verdict=verdict,
        refinement_trace=list(enumerate(values)), threshold_formula=float(threshold), term=term,
        value=extrapolated_limit(values, e) if verdict is Verdict.FINITE else float("nan"),
        increment_exponent=e, parameters=dict(parameters or {}))


def combine(a, b, term="A+B"):
    """Classification of the sum of two ladders evaluated on the same levels."""
    va = np.array([v for _, v in a.refinement_trace])
    vb = np.array([v for _, v in b.refinement_trace])
    n = min(len(va), len(vb))
    params = {**a.parameters, **{f"B.{k}": v for k, v in b.parameters.items()}}
    return classify_ladder(va[:n] + vb[:n], a.exponent_r, a.threshold_formula, term, params)


@dataclass
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float
    n_lo: int
    n_hi: int


def fit_power_law(n, t):
    """Least-squares fit log t = slope * log n + c."""
    n = np.asarray(n, dtype=float)
    t = np.asarray(t, dtype=float)
    keep = (n > 0) & (t > 0)
    x, y = np.log(n[keep]), np.log(t[keep])
    if len(x) < 3:
        return PowerLawFit(float("nan"), float("nan"), 0.0, 0, 0)
    slope, c = np.polyfit(x, y, 1)
    resid = y - (slope * x + c)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 0.0
    return PowerLawFit(float(slope), float(c), float(r2), int(n[keep][0]), int(n[keep][-1]))


def last_decade(n_max, n_min=1):
    """Orders in the last decade [n_max/10, n_max] (at least ``n_min``)."""
    return max(n_min, int(math.ceil(n_max / 10))), int(n_max)


def series_verdict(fit, critical=-1.0, r2_min=0.99):
    if not math.isfinite(fit.slope) or fit.r_squared <= r2_min:
        return SeriesVerdict.INCONCLUSIVE
    return SeriesVerdict.CONVERGENT if fit.slope < critical else SeriesVerdict.DIVERGENT
