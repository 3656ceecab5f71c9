"""Covariances, the fBm Hilbert-space inner product, and Gaussian path sampling."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import lapack

from . import rng
from .errors import ConditioningError, DomainError, GridError
from .quadrature import (QuadratureScheme, SingularityPolicy, composite, graded_edges,
                         left_singular)


class Kind(str, Enum):
    BROWNIAN_SHEET = "BrownianSheet"
    FBM_SHEET = "FbmSheet"


@dataclass(frozen=True)
class CovarianceSpec:
    kind: Kind = Kind.BROWNIAN_SHEET
    time_dim: int = 1
    space_dim: int = 1
    hurst: tuple = ()
    horizon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "hurst", tuple(float(h) for h in self.hurst))
        if self.time_dim < 1 or self.space_dim < 1:
            raise DomainError("time_dim and space_dim must be >= 1")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.kind is Kind.FBM_SHEET:
            if len(self.hurst) == 1 and self.space_dim > 1:
                object.__setattr__(self, "hurst", self.hurst * self.space_dim)
            if len(self.hurst) != self.space_dim:
                raise DomainError("need one Hurst index per space component")
            for h in self.hurst:
                if not 0.5 < h < 1.0:
                    raise DomainError(f"Hurst index must lie in (1/2, 1), got {h}")

    @classmethod
    def brownian(cls, time_dim=1, space_dim=1, horizon=1.0):
        return cls(Kind.BROWNIAN_SHEET, time_dim, space_dim, (), horizon)

    @classmethod
    def fbm(cls, hurst, time_dim=1, space_dim=1, horizon=1.0):
        hurst = (hurst,) if np.isscalar(hurst) else tuple(hurst)
        return cls(Kind.FBM_SHEET, time_dim, space_dim, hurst, horizon)

    def hurst_of(self, component):
        if not 0 <= component < self.space_dim:
            raise IndexError(f"component {component} out of range for d={self.space_dim}")
        return 0.5 if self.kind is Kind.BROWNIAN_SHEET else self.hurst[component]

    def to_dict(self):
        return {"kind": self.kind.value, "time_dim": self.time_dim, "space_dim": self.space_dim,
                "hurst": list(self.hurst), "horizon": self.horizon}

    @classmethod
    def from_dict(cls, d):
        return cls(Kind(d["kind"]), int(d["time_dim"]), int(d["space_dim"]),
                   tuple(d.get("hurst", ())), float(d["horizon"]))


def _points(spec, s):
    s = np.asarray(s, dtype=float)
    if spec.time_dim == 1 and (s.ndim == 0 or s.shape[-1] != 1):
        s = s[..., None]
    if s.shape[-1] != spec.time_dim:
        raise DomainError(f"time points must have {spec.time_dim} coordinates")
    return s


def fbm_covariance_1d(t, s, hurst):
    """R^H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)


def covariance(spec, component, s, t):
    """E[B^k_s B^k_t] for the sheet; products of the one-parameter covariances."""
    h = spec.hurst_of(component)
    s = _points(spec, s)
    t = _points(spec, t)
    if spec.kind is Kind.BROWNIAN_SHEET:
        val = np.prod(np.minimum(s, t), axis=-1)
    else:
        # min/max ordering makes the result exactly symmetric
        lo, hi = np.minimum(s, t), np.maximum(s, t)
        val = np.prod(fbm_covariance_1d(hi, lo, h), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def variance_fn(spec, component, s):
    """R(s) = E[(B^k_s)^2]: |s| for Brownian sheets, |s|^{2H_k} for fBm sheets."""
    h = spec.hurst_of(component)
    s = _points(spec, s)
    val = np.prod(s, axis=-1) ** (2.0 * h)
    return float(val) if np.ndim(val) == 0 else val


def increment_variance(spec, component, s, t):
    """E[(B_s - B_t)^2] = R(s) + R(t) - 2 R(s, t)."""
    return (variance_fn(spec, component, s) + variance_fn(spec, component, t)
            - 2.0 * covariance(spec, component, s, t))


# ---------------------------------------------------------------------------
# H_H inner product
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    """Piecewise-constant function: ``values[i]`` on [edges[i], edges[i+1])."""

    edges: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.edges) != len(self.values) + 1:
            raise ValueError("need len(edges) == len(values) + 1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        e = np.asarray(self.edges)
        idx = np.searchsorted(e, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.values))
        vals = np.asarray(self.values)[np.clip(idx, 0, len(self.values) - 1)]
        return np.where(inside, vals, 0.0)

    @property
    def breakpoints(self):
        return self.edges

    @classmethod
    def indicator(cls, a, b):
        return cls((a, b), (1.0,))


def _breaks(fn, extra):
    pts = list(extra or ())
    pts += list(getattr(fn, "breakpoints", ()))
    return pts


def _inner_rule(lo, hi, panels, q, breaks):
    pts = [p for p in breaks if lo < p < hi]
    edges = np.unique(np.concatenate([np.linspace(lo, hi, panels + 1), pts]))
    return composite(edges, q)


def hh_inner(f, g, hurst, scheme=None, horizon=1.0, breakpoints=None):
    """<f, g>_{H_H} = H(2H-1) int_0^T int_0^T f(u) g(v) |u - v|^{2H-2} du dv.

    The double integral is rewritten over w = |u - v|:

        int_0^T w^{2H-2} int_0^{T-w} [f(v+w) g(v) + f(v) g(v+w)] dv dw,

    which isolates the integrable singularity in a single variable.  Under
    SubtractAndTransform the first w-panel carries a Gauss-Jacobi rule for the
    weight w^{2H-2}; under GradedMesh plain Gauss-Legendre is used on panels
    graded towards w = 0.  Discontinuities of f and g (``breakpoints`` or a
    ``breakpoints`` attribute) become panel edges.
    """
    if not 0.5 < hurst < 1.0:
        raise DomainError(f"Hurst index must lie in (1/2, 1), got {hurst}")
    scheme = scheme or QuadratureScheme()
    T = float(horizon)
    beta = 2.0 * hurst - 2.0
    bf = [b for b in _breaks(f, breakpoints) if 0.0 <= b <= T]
    bg = [b for b in _breaks(g, breakpoints) if 0.0 <= b <= T]
    # kinks of the inner integral in w sit at differences of breakpoints
    wk = sorted({abs(a - b) for a in bf + [0.0, T] for b in bg + [0.0, T]} - {0.0})
    wk = [w for w in wk if 0.0 < w < T]
    P, q = scheme.panel_count, scheme.nodes_per_panel

    if scheme.singularity_policy is SingularityPolicy.SUBTRACT_AND_TRANSFORM:
        edges = np.unique(np.concatenate([np.linspace(0.0, T, P + 1), wk]))
        n0, w0 = left_singular(edges[0], edges[1], beta, q)
        n1, w1 = composite(edges[1:], q)
        w_nodes = np.concatenate([n0, n1])
        w_weights = np.concatenate([w0, w1 * n1**beta])
    else:
        edges = np.unique(np.concatenate([graded_edges(0.0, T, P, grading=2.0 / (2.0 * hurst - 1.0)), wk]))
        w_nodes, ww = composite(edges, q)
        w_weights = ww * w_nodes**beta

    total = 0.0
    for w, wt in zip(w_nodes, w_weights):
        hi = T - w
        if hi <= 0:
            continue
        breaks = [b - w for b in bf] + list(bg) + [b - w for b in bg] + list(bf)
        v, vw = _inner_rule(0.0, hi, max(1, P // 2), q, breaks)
        inner = np.dot(vw, f(v + w) * g(v) + f(v) * g(v + w))
        total += wt * inner
    return hurst * (2.0 * hurst - 1.0) * total


def hh_inner_product(fs, gs, hurst, scheme=None, horizon=1.0):
    """Inner product in H_H^{(x) m} of separable tensors prod_i f_i(u_i)."""
    val = 1.0
    for f, g in zip(fs, gs):
        val *= hh_inner(f, g, hurst, scheme, horizon)
    return val


# ---------------------------------------------------------------------------
# Path sampling
# ---------------------------------------------------------------------------

def tensor_grid(*axes):
    """Cartesian product of 1-d axes as an array of shape (G, N)."""
    mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def covariance_matrix(spec, component, grid):
    grid = _points(spec, grid)
    return covariance(spec, component, grid[:, None, :], grid[None, :, :])


def cholesky_with_jitter(cov, max_jitter=1e-12):
    """Lower Cholesky factor, adding at most ``max_jitter * trace`` to the diagonal."""
    cov = np.asarray(cov, dtype=float)
    tr = float(np.trace(cov))
    info = 0
    for rel in (0.0, 1e-16, 1e-15, 1e-14, 1e-13, max_jitter):
        a = cov + rel * tr * np.eye(len(cov)) if rel else cov
        c, info = lapack.dpotrf(a, lower=1, clean=1)
        if info == 0:
            return c, rel * tr
    raise ConditioningError(
        f"covariance not positive definite: leading minor {info} failed after jitter "
        f"{max_jitter:g} * trace", minor=int(info))


@dataclass
class PathEnsemble:
    grid: np.ndarray
    values: np.ndarray
    seed: int
    spec: CovarianceSpec
    stream_ids: list = field(default_factory=list)

    @property
    def n_paths(self):
        return self.values.shape[0]

    def index_of(self, s, atol=1e-12):
        s = _points(self.spec, s).reshape(-1)
        hit = np.where(np.all(np.abs(self.grid - s) <= atol, axis=1))[0]
        if len(hit) == 0:
            raise GridError(f"time point {s.tolist()} is not on the sampled grid; "
                            "interpolation is not performed")
        return int(hit[0])

    def at(self, s, component=0):
        return self.values[:, component, self.index_of(s)]

    def to_csv(self, path):
        P, d, G = self.values.shape
        p, k, g = np.meshgrid(np.arange(P), np.arange(d), np.arange(G), indexing="ij")
        with open(path, "w", newline="") as fh:
            fh.write("path,component,grid_index,value\n")
            for row in zip(p.ravel(), k.ravel(), g.ravel(), self.values.ravel()):
                fh.write(f"{row[0]},{row[1]},{row[2]},{float(row[3])!r}\n")

    def metadata(self):
        return {"spec": self.spec.to_dict(), "seed": int(self.seed),
                "grid": self.grid.tolist(), "n_paths": int(self.n_paths),
                "rng_stream_ids": list(self.stream_ids)}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2)

    @classmethod
    def from_files(cls, csv_path, json_path):
        with open(json_path) as fh:
            meta = json.load(fh)
        spec = CovarianceSpec.from_dict(meta["spec"])
        grid = np.asarray(meta["grid"], dtype=float)
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        values = np.zeros((int(meta["n_paths"]), spec.space_dim, len(grid)))
        values[data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2].astype(int)] = data[:, 3]
        return cls(grid, values, int(meta["seed"]), spec, meta.get("rng_stream_ids", []))


def sample_paths(spec, grid, n_paths, seed, workers=None):
    """Sample ``n_paths`` realizations of every component on ``grid``.

    Grid points with a zero coordinate are pinned to 0; the remaining points are
    sampled jointly through the Cholesky factor of their covariance.  Normals
    come from ``rng`` streams keyed by (seed, component, path block), so the
    ensemble does not depend on the worker count.
    """
    grid = _points(spec, np.asarray(grid, dtype=float).reshape(-1, spec.time_dim))
    if np.any(grid < 0) or np.any(grid > spec.horizon * (1 + 1e-12)):
        raise DomainError("grid points must lie in [0, T]^N")
    inner = np.all(grid > 0, axis=1)
    values = np.zeros((int(n_paths), spec.space_dim, len(grid)))
    ids = []
    for k in range(spec.space_dim):
        ids.append(rng.stream_id(seed, rng.PATHS, k))
        if not np.any(inner):
            continue
        L, _ = cholesky_with_jitter(covariance_matrix(spec, k, grid[inner]))
        z = rng.standard_normals(seed, rng.PATHS, k, n_paths, int(inner.sum()), workers)
        values[:, k, inner] = z @ L.T
    return PathEnsemble(grid, values, int(seed), spec, ids)


def brownian_increments(seed, component, n_paths, n_steps, horizon, workers=None):
    """Increments of standard Brownian motion on a uniform grid, (n_paths, n_steps)."""
    dt = horizon / n_steps
    z = rng.standard_normals(seed, rng.INCREMENTS, component, n_paths, n_steps, workers)
    return z * math.sqrt(dt)
