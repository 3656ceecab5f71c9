"""Composite Gauss rules, endpoint-singular panels and refinement schemes."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import special


class SingularityPolicy(str, Enum):
    SUBTRACT_AND_TRANSFORM = "SubtractAndTransform"
    GRADED_MESH = "GradedMesh"


@dataclass(frozen=True)
class QuadratureScheme:
    """Panel layout plus the truncation ladder used by divergence detection.

    ``eps0`` and ``levels`` describe the excluded neighbourhoods
    eps_k = 2^{-k} eps0 (k = 0..levels) of a candidate singularity.
    """

    panel_count: int = 16
    nodes_per_panel: int = 12
    singularity_policy: SingularityPolicy = SingularityPolicy.SUBTRACT_AND_TRANSFORM
    refinement_level: int = 0
    eps0: float = 2.0 ** -20
    levels: int = 40

    def __post_init__(self):
        if self.panel_count < 1 or self.nodes_per_panel < 1:
            raise ValueError("panel_count and nodes_per_panel must be >= 1")
        object.__setattr__(self, "singularity_policy", SingularityPolicy(self.singularity_policy))

    def refined(self, times=1):
        return replace(self, panel_count=self.panel_count * 2 ** times,
                       refinement_level=self.refinement_level + times)

    def to_dict(self):
        return {"panel_count": self.panel_count, "nodes_per_panel": self.nodes_per_panel,
                "singularity_policy": self.singularity_policy.value,
                "refinement_level": self.refinement_level, "eps0": self.eps0,
                "levels": self.levels}


@lru_cache(maxsize=64)
def gauss_legendre(q):
    x, w = np.polynomial.legendre.leggauss(int(q))
    return x, w


@lru_cache(maxsize=64)
def _gauss_jacobi(q, alpha, beta):
    x, w = special.roots_jacobi(int(q), alpha, beta)
    return x, w


def composite(edges, q):
    """Nodes and weights of q-point Gauss-Legendre on every [edges[i], edges[i+1]]."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(q)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x
    weights = half * w
    return nodes.ravel(), weights.ravel()


def left_singular(a, b, beta, q):
    """Rule for int_a^b (x - a)^beta f(x) dx, f smooth; weights include the power."""
    x, w = _gauss_jacobi(int(q), 0.0, float(beta))
    h = 0.5 * (b - a)
    nodes = a + h * (x + 1.0)
    weights = w * h ** (beta + 1.0)
    return nodes, weights


def right_singular(a, b, beta, q):
    """Rule for int_a^b (b - x)^beta f(x) dx."""
    x, w = _gauss_jacobi(int(q), float(beta), 0.0)
    h = 0.5 * (b - a)
    nodes = a + h * (x + 1.0)
    weights = w * h ** (beta + 1.0)
    return nodes, weights


def geometric_edges(lo, hi, ratio=2.0):
    """Edges lo, lo*ratio, ..., hi (last panel shortened); requires 0 < lo < hi."""
    n = max(1, int(math.ceil(math.log(hi / lo) / math.log(ratio))))
    return np.geomspace(lo, hi, n + 1)


def graded_edges(a, b, panels, grading=3.0):
    """Edges clustered towards ``a`` as ((i/panels)^grading)."""
    t = np.linspace(0.0, 1.0, int(panels) + 1) ** grading
    return a + (b - a) * t
