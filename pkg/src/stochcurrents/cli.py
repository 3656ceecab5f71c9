"""Command-line interface: ``stochcurrents verify|scan|paths|report``.

Exit status is 0 when every declared tolerance passes, 1 when a check fails,
and 2 on configuration, capability or scan errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, harness
from .errors import CurrentsError
from .gaussian_model import sample_paths


def _config(args, experiment, suffix=""):
    if args.config:
        cfg = harness.ExperimentConfig.from_file(args.config, experiment)
    else:
        cfg = harness.ExperimentConfig.default(experiment)
    out = args.out or (None if args.config else os.path.join("out", cfg.experiment.value + suffix))
    return cfg.with_overrides(seed=args.seed, out=out, n_max=args.n_max,
                              refine_levels=args.refine_levels)


def _summary(report):
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value} {c.op} {c.tolerance}")
    print(f"{'PASS' if report.passed else 'FAIL'}  ({report.wall_time:.2f} s)")


def cmd_verify(args):
    cfg = _config(args, args.experiment)
    report = harness.run(cfg)
    _summary(report)
    print(f"report written to {os.path.join(cfg.output_path, 'report.json')}")
    return 0 if report.passed else 1


def cmd_scan(args):
    cfg = _config(args, args.experiment, "_scan")
    report = harness.run_scan(cfg, refine=not args.no_refine)
    s = report.scan
    print(f"{s['experiment']}: estimate {s['estimate']:.4f}, bracket {s['bracket']}, "
          f"formula {s['formula']:.4f}")
    _summary(report)
    return 0 if report.passed else 1


def cmd_paths(args):
    cfg = _config(args, "Prop1MC") if args.config is None else \
        harness.ExperimentConfig.from_file(args.config).with_overrides(seed=args.seed, out=args.out)
    spec = cfg.driver
    out = args.out or "out/paths"
    os.makedirs(out, exist_ok=True)
    axis = np.linspace(0.0, spec.horizon, args.n_steps + 1)
    if spec.time_dim == 1:
        grid = axis[:, None]
    else:
        grid = np.stack(np.meshgrid(*([axis] * spec.time_dim), indexing="ij"), -1).reshape(-1, spec.time_dim)
    ens = sample_paths(spec, grid, args.n_paths, cfg.seed)
    ens.to_csv(os.path.join(out, "paths.csv"))
    ens.to_json(os.path.join(out, "paths.json"))
    print(f"wrote {ens.n_paths} paths x {spec.space_dim} components x {len(grid)} points to {out}")
    return 0


def cmd_report(args):
    d = harness.load_report(args.path)
    ok = harness.report_passed(d)
    print(f"{d['config']['experiment']} (schema {d['schema_version']}, artifact {d['artifact_version']})")
    for c in d["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']} {c['op']} {c['tolerance']}")
    if d.get("scan"):
        print("scan:", json.dumps({k: d["scan"][k] for k in ("estimate", "formula", "bracket")}))
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="stochcurrents", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    names = [e.value for e in harness.Experiment]

    def common(sp):
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--seed", type=int, help="unsigned 64-bit seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--n-max", type=int, dest="n_max", help="truncation order")
        sp.add_argument("--refine-levels", type=int, dest="refine_levels",
                        help="number of truncation-ladder levels")

    v = sub.add_parser("verify", help="run one experiment and check its tolerances")
    v.add_argument("experiment", choices=names)
    common(v)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("scan", help="locate a critical exponent by bracketing and bisection")
    s.add_argument("experiment", choices=sorted(e.value for e in harness.THRESHOLD_EXPERIMENTS))
    s.add_argument("--no-refine", action="store_true", help="skip bisection of the bracket")
    common(s)
    s.set_defaults(func=cmd_scan)

    pa = sub.add_parser("paths", help="sample Gaussian paths of the configured driver")
    common(pa)
    pa.add_argument("--n-paths", type=int, default=100, dest="n_paths")
    pa.add_argument("--n-steps", type=int, default=100, dest="n_steps")
    pa.set_defaults(func=cmd_paths)

    r = sub.add_parser("report", help="print a stored report and re-derive pass/fail")
    r.add_argument("path", help="report.json or the directory holding it")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CurrentsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
