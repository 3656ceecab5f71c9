"""Experiment configuration, threshold scans and report emission.

A configuration is a small INI file::

    [experiment]
    name = Prop3
    seed = 0
    output_path = out/prop3

    [driver]
    kind = FbmSheet
    hurst = 0.75

    [sweep]
    values = 0.05, 0.3

    [tolerances]
    ...

    [params]
    ...

Every key has a per-experiment default, and the fully resolved configuration
is echoed into the report so that a report is self-contained.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

import numpy as np

from . import __version__, rng
from .chaos import GaussianBump, stroock_pairing_test
from .classify import SeriesVerdict, Verdict, fit_power_law
from .currents import (a_threshold, fbm_A_term, fbm_B_term, fbm_multidim_Ck, fbm_multidim_Dk,
                       fbm_total, multidim_threshold, sobolev_norm_bm,
                       xi_hat_mc_bm, xi_hat_second_moment_series)
from .errors import ConfigError, ScanError, UnsupportedDriverError
from .gaussian_model import CovarianceSpec, Kind
from .hermite_gauss import log_cn_bound
from .quadrature import QuadratureScheme
from .watanabe import edd_integral, fbm_threshold, watanabe_current_bm, watanabe_current_fbm

SCHEMA_VERSION = "1.0"


class Experiment(str, Enum):
    PROP1_SERIES = "Prop1Series"
    PROP1_MC = "Prop1MC"
    PROP2 = "Prop2"
    PROP3 = "Prop3"
    PROP4 = "Prop4"
    PROP5 = "Prop5"
    PROP6 = "Prop6"
    STROOCK = "Stroock"
    EDD_SCALING = "EddScaling"
    STIRLING_CN = "StirlingCn"


THRESHOLD_EXPERIMENTS = {Experiment.PROP2, Experiment.PROP3, Experiment.PROP4,
                         Experiment.PROP5, Experiment.PROP6}
MONTE_CARLO_EXPERIMENTS = {Experiment.PROP1_MC, Experiment.STROOCK}

_BM = {"kind": "BrownianSheet", "time_dim": 1, "space_dim": 1, "hurst": "", "horizon": 1.0}
_FBM = {"kind": "FbmSheet", "time_dim": 1, "space_dim": 1, "hurst": "0.75", "horizon": 1.0}

# Per experiment: driver, verify sweep, scan grid, tolerances, params.
# Sweeps for Prop5 and Prop6 are values of alpha; their scans run over -alpha.
DEFAULTS = {
    Experiment.PROP1_SERIES: dict(
        driver=_BM, sweep=[], scan=[], tol={"abs": 1e-8},
        params={"x_values": "0.5, 1, 2", "T_values": "1, 2", "n_max": 0}),
    Experiment.PROP1_MC: dict(
        driver=_BM, sweep=[], scan=[], tol={"n_se": 3.0, "rel": 0.02},
        params={"x": 1.0, "n_paths": 20000, "n_steps": 2000}),
    Experiment.PROP2: dict(
        driver={**_BM, "time_dim": 2, "space_dim": 2}, sweep=[0.9, 1.1],
        scan=[0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7], tol={"series_abs": 1e-6, "scan": 0.05},
        params={"x": 2.0, "n_max": 80}),
    Experiment.PROP3: dict(
        driver=_FBM, sweep=[0.05, 0.3],
        scan=[0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95, 1.05, 1.15, 1.25],
        tol={"scan": 0.05}, params={}),
    Experiment.PROP4: dict(
        driver={**_FBM, "space_dim": 2}, sweep=[0.5, 0.8],
        scan=[0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95, 1.05, 1.15, 1.25, 1.35, 1.45],
        tol={"scan": 0.05}, params={"d1_sweep": "0.05, 0.3"}),
    Experiment.PROP5: dict(
        driver=_BM, sweep=[-0.6, -0.3],
        scan=[-0.1, -0.2, -0.3, -0.4, -0.6, -0.7, -0.8, -0.9],
        tol={"scan": 0.05}, params={"x": 1.0, "a": 0.1, "n_max": 1000}),
    Experiment.PROP6: dict(
        driver=_FBM, sweep=[-0.95, -0.7],
        scan=[-0.45, -0.55, -0.65, -0.75, -0.85, -0.95, -1.05, -1.15, -1.25],
        tol={"scan": 0.05}, params={"x": 1.0, "n_max": 200}),
    Experiment.STROOCK: dict(
        driver=_BM, sweep=[], scan=[], tol={"gap": 1e-2, "n_se": 2.0},
        params={"n_max_values": "5, 10, 20", "n_paths": 100000, "variance": 1.0}),
    Experiment.EDD_SCALING: dict(
        driver=_FBM, sweep=[], scan=[], tol={"slope": 0.1},
        params={"H_values": "0.6, 0.75, 0.9", "n_lo": 20, "n_hi": 200}),
    Experiment.STIRLING_CN: dict(
        driver=_BM, sweep=[], scan=[], tol={"drift": 0.01},
        params={"n_lo": 200, "n_hi": 400}),
}

_DRIVER_KEYS = {"kind", "time_dim", "space_dim", "hurst", "horizon"}
_SECTIONS = {"experiment", "driver", "sweep", "tolerances", "params"}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: Experiment
    driver: CovarianceSpec
    sweep: list
    tolerances: dict
    seed: int | None = 0
    output_path: str = "out"
    params: dict = field(default_factory=dict)
    scan_grid: list = field(default_factory=list)
    scheme: QuadratureScheme = field(default_factory=QuadratureScheme)

    def __post_init__(self):
        self.experiment = Experiment(self.experiment)
        if self.experiment in THRESHOLD_EXPERIMENTS and not self.sweep:
            raise ConfigError("sweep must be non-empty for a threshold experiment", "sweep.values")
        if self.experiment in MONTE_CARLO_EXPERIMENTS and self.seed is None:
            raise ConfigError("seed is required for a Monte Carlo experiment", "experiment.seed")

    @classmethod
    def default(cls, experiment, **overrides):
        experiment = _experiment(experiment)
        base = DEFAULTS[experiment]
        kw = dict(experiment=experiment, driver=_driver(dict(base["driver"])),
                  sweep=list(base["sweep"]), tolerances=dict(base["tol"]), seed=0,
                  output_path="out", params=dict(base["params"]), scan_grid=list(base["scan"]))
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def from_text(cls, text, experiment=None):
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable configuration: {exc}", "<file>") from exc
        for sec in cp.sections():
            if sec not in _SECTIONS:
                raise ConfigError(f"unknown section (expected one of {sorted(_SECTIONS)})", sec)
        ex = cp.get("experiment", "name", fallback=None) or experiment
        if ex is None:
            raise ConfigError("experiment name is required", "experiment.name")
        exp = _experiment(ex, "experiment.name")
        if experiment is not None and _experiment(experiment) is not exp:
            raise ConfigError(f"configuration is for {exp.value}, not {experiment}", "experiment.name")
        base = DEFAULTS[exp]

        for key in (cp["experiment"] if cp.has_section("experiment") else {}):
            if key not in {"name", "seed", "output_path", "refine_levels"}:
                raise ConfigError("unknown key", f"experiment.{key}")
        seed = 0
        if cp.has_option("experiment", "seed"):
            raw = cp.get("experiment", "seed").strip()
            seed = None if raw == "" else _int(raw, "experiment.seed")
            if seed is not None and not 0 <= seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer", "experiment.seed")
        out = cp.get("experiment", "output_path", fallback="out")
        scheme = QuadratureScheme()
        if cp.has_option("experiment", "refine_levels"):
            scheme = QuadratureScheme(levels=_int(cp.get("experiment", "refine_levels"),
                                                  "experiment.refine_levels"))

        drv = dict(base["driver"])
        if cp.has_section("driver"):
            for key, val in cp["driver"].items():
                if key not in _DRIVER_KEYS:
                    raise ConfigError("unknown key", f"driver.{key}")
                drv[key] = val
        driver = _driver(drv)

        sweep, scan = list(base["sweep"]), list(base["scan"])
        if cp.has_section("sweep"):
            for key in cp["sweep"]:
                if key != "values":
                    raise ConfigError("unknown key", f"sweep.{key}")
            if cp.has_option("sweep", "values"):
                sweep = _floats(cp.get("sweep", "values"), "sweep.values")
                scan = list(sweep)

        tol = dict(base["tol"])
        if cp.has_section("tolerances"):
            for key, val in cp["tolerances"].items():
                if key not in tol:
                    raise ConfigError("unknown tolerance", f"tolerances.{key}")
                tol[key] = _float(val, f"tolerances.{key}")

        params = dict(base["params"])
        if cp.has_section("params"):
            for key, val in cp["params"].items():
                if key not in params:
                    raise ConfigError("unknown parameter", f"params.{key}")
                default = params[key]
                if isinstance(default, str):
                    _floats(val, f"params.{key}")
                    params[key] = val
                elif isinstance(default, int):
                    params[key] = _int(val, f"params.{key}")
                else:
                    params[key] = _float(val, f"params.{key}")
        return cls(exp, driver, sweep, tol, seed, out, params, scan, scheme)

    @classmethod
    def from_file(cls, path, experiment=None):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc}", "<file>") from exc
        return cls.from_text(text, experiment)

    def with_overrides(self, seed=None, out=None, n_max=None, refine_levels=None):
        if seed is not None:
            self.seed = int(seed)
        if out is not None:
            self.output_path = str(out)
        if n_max is not None:
            if "n_max" not in self.params:
                raise ConfigError(f"{self.experiment.value} has no truncation order", "params.n_max")
            self.params["n_max"] = int(n_max)
        if refine_levels is not None:
            self.scheme = QuadratureScheme(levels=int(refine_levels))
        return self

    def to_dict(self):
        return {"experiment": self.experiment.value, "driver": self.driver.to_dict(),
                "sweep": list(self.sweep), "scan_grid": list(self.scan_grid),
                "tolerances": dict(self.tolerances), "seed": self.seed,
                "output_path": self.output_path, "params": dict(self.params),
                "scheme": self.scheme.to_dict()}


def _experiment(name, path="experiment"):
    try:
        return Experiment(name)
    except ValueError:
        raise ConfigError(f"unknown experiment {name!r} (choose from "
                          f"{', '.join(e.value for e in Experiment)})", path) from None


def _float(text, path):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {text!r}", path) from None


def _int(text, path):
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", path) from None


def _floats(text, path):
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    return [_float(p, path) for p in parts]


def _driver(d):
    try:
        kind = Kind(str(d["kind"]).strip())
    except ValueError:
        raise ConfigError(f"unknown driver kind {d['kind']!r}", "driver.kind") from None
    time_dim = _int(d["time_dim"], "driver.time_dim")
    space_dim = _int(d["space_dim"], "driver.space_dim")
    horizon = _float(d["horizon"], "driver.horizon")
    hurst = _floats(d.get("hurst", ""), "driver.hurst") if kind is Kind.FBM_SHEET else []
    try:
        return CovarianceSpec(kind, time_dim, space_dim, tuple(hurst), horizon)
    except ValueError as exc:
        raise ConfigError(str(exc), "driver") from None


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class Check:
    """One declared tolerance: ``value`` compared with ``tolerance`` by ``op``."""

    name: str
    value: object
    tolerance: object
    op: str = "<="

    @property
    def passed(self):
        v, t = self.value, self.tolerance
        if self.op == "<=":
            return bool(math.isfinite(v) and v <= t)
        if self.op == "<":
            return bool(math.isfinite(v) and v < t)
        if self.op == "==":
            return v == t
        raise ValueError(f"unknown comparison {self.op}")

    def to_dict(self):
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance,
                "op": self.op, "passed": self.passed}


@dataclass
class RunReport:
    config: dict
    points: list
    checks: list
    wall_time: float
    rng_stream_ids: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    scan: dict | None = None
    artifact_version: str = __version__
    schema_version: str = SCHEMA_VERSION
    created: str = ""

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"schema_version": self.schema_version, "artifact_version": self.artifact_version,
                "config": self.config, "points": self.points,
                "checks": [c.to_dict() for c in self.checks], "passed": self.passed,
                "scan": self.scan, "rng_stream_ids": list(self.rng_stream_ids),
                "metadata": {"wall_time": self.wall_time, "created": self.created}}

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), indent=2, allow_nan=True)

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", newline="\n") as fh:
            fh.write(self.to_json() + "\n")
        tables = dict(self.tables)
        tables["checks"] = (["name", "value", "tolerance", "op", "passed"],
                            [[c.name, c.value, c.tolerance, c.op, c.passed] for c in self.checks])
        for name, (header, rows) in tables.items():
            with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
                fh.write(csv_text(header, rows))


def load_report(path):
    if os.path.isdir(path):
        path = os.path.join(path, "report.json")
    with open(path) as fh:
        return json.load(fh)


def report_passed(d):
    """Re-derive pass/fail from the stored numbers of a loaded report."""
    return all(Check(c["name"], c["value"], c["tolerance"], c["op"]).passed for c in d["checks"])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, Enum):
        return v.value
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# Per-point evaluations (one exponent value each)
# ---------------------------------------------------------------------------

def _need_fbm(cfg):
    if cfg.driver.kind is not Kind.FBM_SHEET:
        raise UnsupportedDriverError(f"{cfg.experiment.value} needs a fractional driver (FbmSheet)")


def _need_bm(cfg):
    if cfg.driver.kind is not Kind.BROWNIAN_SHEET:
        raise UnsupportedDriverError(f"{cfg.experiment.value} needs a Brownian driver")


def _need_one_parameter(cfg):
    if cfg.driver.time_dim != 1:
        raise UnsupportedDriverError(f"{cfg.experiment.value} needs a one-parameter driver (time_dim = 1)")


def _check_pairing(cfg):
    ex = cfg.experiment
    if ex in (Experiment.PROP1_SERIES, Experiment.PROP1_MC, Experiment.PROP2, Experiment.PROP5):
        _need_bm(cfg)
    if ex in (Experiment.PROP1_MC, Experiment.PROP5):
        _need_one_parameter(cfg)
    if ex in (Experiment.PROP3, Experiment.PROP6):
        _need_fbm(cfg)
        _need_one_parameter(cfg)
    if ex is Experiment.PROP4:
        _need_fbm(cfg)
        if cfg.driver.time_dim > 2:
            raise UnsupportedDriverError("Prop4 supports time_dim 1 or 2")


def _finite_like(verdict):
    return verdict in (Verdict.FINITE, SeriesVerdict.CONVERGENT)


def _series_resolved(series):
    """Series verdict with Inconclusive settled by the fitted slope against -1."""
    if series.classification is not SeriesVerdict.INCONCLUSIVE or not math.isfinite(series.fitted_decay_exponent):
        return series.classification
    return SeriesVerdict.CONVERGENT if series.fitted_decay_exponent < -1 else SeriesVerdict.DIVERGENT


def _h(cfg, k=0):
    return cfg.driver.hurst_of(k)


def formula_threshold(cfg):
    """Closed-form critical exponent of the experiment (r for Prop2-4, -alpha for Prop5-6)."""
    ex = cfg.experiment
    if ex is Experiment.PROP2:
        return 0.5 * cfg.driver.space_dim
    if ex is Experiment.PROP3:
        return a_threshold(_h(cfg))
    if ex is Experiment.PROP4:
        return multidim_threshold(_h(cfg), cfg.driver.space_dim)
    if ex is Experiment.PROP5:
        return 0.5
    if ex is Experiment.PROP6:
        return fbm_threshold(_h(cfg))
    raise ScanError(f"{ex.value} has no threshold")


def scan_variable(experiment, value):
    """Map a sweep value to the scanned exponent (finite side at larger values)."""
    return -value if experiment in (Experiment.PROP5, Experiment.PROP6) else value


def evaluate_point(cfg, value):
    """Classify one sweep value; returns (finite_like, record dict, trace rows)."""
    ex, T = cfg.experiment, cfg.driver.horizon
    p = cfg.params
    if ex is Experiment.PROP2:
        c = sobolev_norm_bm(value, cfg.driver.space_dim, cfg.driver.time_dim, T)
        return _finite_like(c.verdict), {"exponent": value, "terms": {"norm": c.to_dict()}}, \
            [[value, "norm", k, v] for k, v in c.refinement_trace]
    if ex is Experiment.PROP3:
        H = _h(cfg)
        a = fbm_A_term(H, value, T, cfg.scheme)
        b = fbm_B_term(H, value, T, cfg.scheme)
        tot = fbm_total(H, value, T, cfg.scheme)
        terms = {"A": a, "B": b, "A+B": tot}
        rows = [[value, name, k, v] for name, c in terms.items() for k, v in c.refinement_trace]
        return _finite_like(tot.resolved_verdict), \
            {"exponent": value, "terms": {k: c.to_dict() for k, c in terms.items()}}, rows
    if ex is Experiment.PROP4:
        H, d, N = _h(cfg), cfg.driver.space_dim, cfg.driver.time_dim
        terms = {"C_k": fbm_multidim_Ck(H, value, d, N, T, cfg.scheme)}
        if N == 1:
            terms["D_k"] = fbm_multidim_Dk(H, value, d, T, cfg.scheme)
        rows = [[value, name, k, v] for name, c in terms.items() for k, v in c.refinement_trace]
        ok = all(_finite_like(c.resolved_verdict) for c in terms.values())
        return ok, {"exponent": value, "terms": {k: c.to_dict() for k, c in terms.items()}}, rows
    if ex in (Experiment.PROP5, Experiment.PROP6):
        if ex is Experiment.PROP5:
            s = watanabe_current_bm(p["x"], p["a"] * T, T, value, p["n_max"])
        else:
            s = watanabe_current_fbm(p["x"], _h(cfg), T, value, p["n_max"])
        rec = {"exponent": value, "series": {k: v for k, v in s.to_dict().items()
                                            if k not in ("terms", "partial_sums")},
               "resolved": _series_resolved(s).value}
        rows = [[value, n, t, ps] for n, (t, ps) in enumerate(zip(s.terms, s.partial_sums))]
        return _finite_like(_series_resolved(s)), rec, rows
    raise ScanError(f"{ex.value} is not a threshold experiment")


def _sweep_points(cfg, values):
    with ThreadPoolExecutor(max_workers=rng.worker_count()) as ex:
        return list(ex.map(lambda v: evaluate_point(cfg, v), values))


def _verdict_rows(records):
    rows = []
    for rec in records:
        if "terms" in rec:
            for name, c in rec["terms"].items():
                rows.append([rec["exponent"], name, c["verdict"], c["resolved_verdict"], c["value"],
                             c["increment_exponent"], c["threshold_formula"]])
        else:
            s = rec["series"]
            rows.append([rec["exponent"], s["kind"], s["classification"], rec["resolved"],
                         s["fitted_decay_exponent"], s["r_squared"],
                         s["parameters"].get("threshold_minus_alpha", 0.5)])
    return rows


_VERDICT_HEADER = ["exponent", "term", "verdict", "resolved_verdict", "value_or_slope",
                   "increment_exponent_or_r2", "threshold_formula"]


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _run_prop1_series(cfg):
    p = cfg.params
    N = cfg.driver.time_dim
    n_max = p["n_max"] or None
    points, checks, rows = [], [], []
    for T in _floats(p["T_values"], "params.T_values"):
        for x in _floats(p["x_values"], "params.x_values"):
            r = xi_hat_second_moment_series(x, T, N, n_max)
            err = abs(r.estimate - T**N)
            points.append({"x": x, "T": T, "report": r.to_dict(), "abs_error": err})
            checks.append(Check(f"|series - T^N| at x={x:g}, T={T:g}", err, cfg.tolerances["abs"]))
            rows.append([x, T, N, r.truncation["n_max"], r.estimate, T**N, err, r.tail_bound])
    return points, checks, {"series": (["x", "T", "N", "n_max", "estimate", "exact", "abs_error",
                                        "tail_bound"], rows)}, []


def _run_prop1_mc(cfg):
    p, T = cfg.params, cfg.driver.horizon
    r = xi_hat_mc_bm(p["x"], T, p["n_steps"], p["n_paths"], cfg.seed, cfg.driver)
    dev = abs(r.estimate - T)
    checks = [Check("|estimate - T| / stderr", dev / r.stderr, cfg.tolerances["n_se"]),
              Check("relative error", dev / T, cfg.tolerances["rel"], "<")]
    table = {"monte_carlo": (["x", "T", "n_paths", "n_steps", "estimate", "stderr"],
                             [[p["x"], T, p["n_paths"], p["n_steps"], r.estimate, r.stderr]])}
    return [{"report": r.to_dict()}], checks, table, [rng.stream_id(cfg.seed, rng.INCREMENTS, 0)]


def _run_threshold(cfg):
    results = _sweep_points(cfg, cfg.sweep)
    thr = formula_threshold(cfg)
    points, checks, trace = [], [], []
    for value, (ok, rec, rows) in zip(cfg.sweep, results):
        expected = scan_variable(cfg.experiment, value) > thr
        rec["expected_finite"] = expected
        points.append(rec)
        trace.extend(rows)
        label = "alpha" if cfg.experiment in (Experiment.PROP5, Experiment.PROP6) else "r"
        checks.append(Check(f"finite/convergent at {label}={value:g}", ok, expected, "=="))
    tables = {"verdicts": (_VERDICT_HEADER, _verdict_rows(points))}
    if cfg.experiment in (Experiment.PROP5, Experiment.PROP6):
        tables["series"] = (["alpha", "n", "t_n", "partial_sum"], trace)
    else:
        tables["ladder"] = (["exponent", "term", "level", "value"], trace)
    if cfg.experiment is Experiment.PROP2:
        p, N, T = cfg.params, cfg.driver.time_dim, cfg.driver.horizon
        r = xi_hat_second_moment_series(p["x"], T, N, p["n_max"])
        err = abs(r.estimate - T**N)
        points.append({"per_component_series": r.to_dict(), "abs_error": err})
        checks.append(Check(f"|per-component series - T^N| (x={p['x']:g}, N={N})", err,
                            cfg.tolerances["series_abs"]))
    if cfg.experiment is Experiment.PROP4 and cfg.driver.time_dim == 1:
        H = _h(cfg)
        for r in _floats(cfg.params["d1_sweep"], "params.d1_sweep"):
            c = fbm_multidim_Ck(H, r, 1, 1, cfg.driver.horizon, cfg.scheme)
            dk = fbm_multidim_Dk(H, r, 1, cfg.driver.horizon, cfg.scheme)
            a = fbm_A_term(H, r, cfg.driver.horizon, cfg.scheme)
            b = fbm_B_term(H, r, cfg.driver.horizon, cfg.scheme)
            same = c.verdict is a.verdict and dk.verdict is b.verdict
            points.append({"d1_specialization": r, "C_k": c.verdict.value, "A": a.verdict.value,
                           "D_k": dk.verdict.value, "B": b.verdict.value})
            checks.append(Check(f"d=1 verdicts match the one-dimensional terms at r={r:g}",
                                same, True, "=="))
    return points, checks, tables, []


def _run_stroock(cfg):
    p, tol = cfg.params, cfg.tolerances
    n_maxes = [int(v) for v in _floats(p["n_max_values"], "params.n_max_values")]
    reps = [stroock_pairing_test(GaussianBump(), p["variance"], n, p["n_paths"], cfg.seed)
            for n in n_maxes]
    points = [r.to_dict() for r in reps]
    checks = [Check(f"L2 gap at n_max={n_maxes[-1]}", reps[-1].gap_estimate, tol["gap"], "<")]
    for a, b, na, nb in zip(reps, reps[1:], n_maxes, n_maxes[1:]):
        slack = tol["n_se"] * math.hypot(a.gap_stderr, b.gap_stderr)
        checks.append(Check(f"gap(n_max={nb}) - gap(n_max={na}) within {tol['n_se']:g} SE",
                            b.gap_estimate - a.gap_estimate, slack))
    rows = [[r.n_max, r.gap_estimate, r.gap_stderr, r.exact_tail, r.mean_check] for r in reps]
    return points, checks, {"pairing": (["n_max", "gap", "stderr", "exact_tail", "mean_check"], rows)}, \
        [rng.stream_id(cfg.seed, rng.PAIRING, 0)]


def edd_scaling(H, n_lo=20, n_hi=200, scheme=None):
    """Fitted log-log slope of the edd integral over n_lo..n_hi."""
    n = np.arange(n_lo, n_hi + 1)
    vals = np.array([edd_integral(H, int(k), scheme) for k in n])
    return fit_power_law(n, vals), vals


def _run_edd(cfg):
    p = cfg.params
    points, checks, rows = [], [], []
    for H in _floats(p["H_values"], "params.H_values"):
        fit, vals = edd_scaling(H, p["n_lo"], p["n_hi"])
        target = -1.0 / (2 * H)
        points.append({"H": H, "slope": fit.slope, "r_squared": fit.r_squared, "claimed": target})
        checks.append(Check(f"|slope + 1/(2H)| at H={H:g}", abs(fit.slope - target), cfg.tolerances["slope"]))
        rows.extend([H, int(n), v] for n, v in zip(range(p["n_lo"], p["n_hi"] + 1), vals))
    return points, checks, {"edd": (["H", "n", "integral"], rows)}, []


def stirling_drift(n_lo=200, n_hi=400):
    """Relative spread max/min - 1 of n! c_n^2 sqrt(n) over n_lo..n_hi, and the values."""
    n = np.arange(n_lo, n_hi + 1, dtype=float)
    from scipy.special import gammaln
    v = np.exp(gammaln(n + 1) + 2 * log_cn_bound(n) + 0.5 * np.log(n))
    return float(v.max() / v.min() - 1.0), v


def _run_stirling(cfg):
    p = cfg.params
    drift, v = stirling_drift(p["n_lo"], p["n_hi"])
    rows = [[n, x] for n, x in zip(range(p["n_lo"], p["n_hi"] + 1), v)]
    return [{"drift": drift, "limit": 4 * math.sqrt(2) / math.pi**1.5}], \
        [Check("drift of n! c_n^2 sqrt(n)", drift, cfg.tolerances["drift"], "<")], \
        {"stirling": (["n", "n_factorial_cn2_sqrt_n"], rows)}, []


_RUNNERS = {
    Experiment.PROP1_SERIES: _run_prop1_series,
    Experiment.PROP1_MC: _run_prop1_mc,
    Experiment.PROP2: _run_threshold,
    Experiment.PROP3: _run_threshold,
    Experiment.PROP4: _run_threshold,
    Experiment.PROP5: _run_threshold,
    Experiment.PROP6: _run_threshold,
    Experiment.STROOCK: _run_stroock,
    Experiment.EDD_SCALING: _run_edd,
    Experiment.STIRLING_CN: _run_stirling,
}


def run(config, write=True):
    """Execute ``config``, write report.json and CSV tables to its output path, return the report."""
    _check_pairing(config)
    t0 = time.perf_counter()
    points, checks, tables, ids = _RUNNERS[config.experiment](config)
    report = RunReport(config=config.to_dict(), points=_jsonable(points), checks=checks,
                       wall_time=time.perf_counter() - t0, rng_stream_ids=ids, tables=tables,
                       created=datetime.now(timezone.utc).isoformat())
    if write:
        report.write(config.output_path)
    return report


# ---------------------------------------------------------------------------
# Threshold scans
# ---------------------------------------------------------------------------

@dataclass
class ScanResult:
    experiment: str
    estimate: float
    formula: float
    bracket: tuple
    grid: list
    verdicts: list
    bisection: list

    def to_dict(self):
        return {"experiment": self.experiment, "estimate": self.estimate, "formula": self.formula,
                "bracket": list(self.bracket), "grid": self.grid, "verdicts": self.verdicts,
                "bisection": self.bisection}


def _scan_eval(cfg, s):
    """finite_like at scan-exponent s (s = r, or -alpha)."""
    value = -s if cfg.experiment in (Experiment.PROP5, Experiment.PROP6) else s
    return evaluate_point(cfg, value)[0]


def threshold_scan(config, grid=None, refine=True, width=0.02):
    """Critical exponent from the last (Divergent, Finite) pair of the ascending grid.

    The grid is in the scan exponent: r for Props 2-4, -alpha for Props 5-6.
    With ``refine`` the bracket is bisected to ``width``.
    """
    _check_pairing(config)
    if config.experiment not in THRESHOLD_EXPERIMENTS:
        raise ScanError(f"{config.experiment.value} has no threshold to scan")
    if grid is None:
        grid = [scan_variable(config.experiment, v) for v in (config.scan_grid or config.sweep)]
    grid = sorted(set(float(g) for g in grid))
    with ThreadPoolExecutor(max_workers=rng.worker_count()) as ex:
        finite = list(ex.map(lambda s: _scan_eval(config, s), grid))
    bracket = None
    for i in range(len(grid) - 1):
        if not finite[i] and finite[i + 1]:
            bracket = (grid[i], grid[i + 1])
    if bracket is None:
        side = "finite" if all(finite) else "divergent" if not any(finite) else "mixed without a divergent-to-finite step"
        raise ScanError(f"no (Divergent, Finite) bracket in grid {grid} (all {side}); "
                        "widen the grid to span the threshold")
    lo, hi = bracket
    steps = []
    while refine and hi - lo > width:
        mid = 0.5 * (lo + hi)
        ok = _scan_eval(config, mid)
        steps.append([mid, bool(ok)])
        lo, hi = (lo, mid) if ok else (mid, hi)
    return ScanResult(config.experiment.value, 0.5 * (lo + hi), formula_threshold(config),
                      (lo, hi), grid, [bool(f) for f in finite], steps)


def run_scan(config, refine=True, write=True):
    """Threshold scan wrapped in a RunReport (pass iff within the scan tolerance of the formula)."""
    t0 = time.perf_counter()
    res = threshold_scan(config, refine=refine)
    err = abs(res.estimate - res.formula)
    report = RunReport(config=config.to_dict(), points=[], scan=res.to_dict(),
                       checks=[Check("|scan estimate - formula|", err, config.tolerances["scan"])],
                       wall_time=time.perf_counter() - t0,
                       tables={"scan": (["exponent", "finite"],
                                        [[g, f] for g, f in zip(res.grid, res.verdicts)] + res.bisection)},
                       created=datetime.now(timezone.utc).isoformat())
    if write:
        report.write(config.output_path)
    return report
