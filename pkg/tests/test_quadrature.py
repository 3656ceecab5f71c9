import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochcurrents.quadrature import (QuadratureScheme, SingularityPolicy, composite,
                                      geometric_edges, graded_edges, left_singular, right_singular)


def test_composite_polynomial_exact():
    x, w = composite(np.linspace(0, 2, 5), 6)
    assert np.dot(w, x**7) == pytest.approx(2**8 / 8, rel=1e-14)


@given(st.floats(-0.9, 2.0))
def test_left_singular_power(beta):
    # int_0^1 x^beta * x^2 dx = 1 / (beta + 3)
    x, w = left_singular(0.0, 1.0, beta, 10)
    assert np.dot(w, x**2) == pytest.approx(1 / (beta + 3), rel=1e-12)


def test_right_singular_power():
    x, w = right_singular(0.0, 1.0, -0.5, 10)
    assert np.dot(w, np.ones_like(x)) == pytest.approx(2.0, rel=1e-13)


def test_edges():
    e = geometric_edges(1e-3, 1.0, 2.0)
    assert e[0] == pytest.approx(1e-3) and e[-1] == 1.0 and np.all(np.diff(e) > 0)
    g = graded_edges(0.0, 1.0, 8, 3.0)
    assert g[0] == 0.0 and g[-1] == 1.0 and np.all(np.diff(np.diff(g)) > 0)


def test_scheme_roundtrip():
    s = QuadratureScheme(singularity_policy="GradedMesh")
    assert s.singularity_policy is SingularityPolicy.GRADED_MESH
    r = s.refined(2)
    assert r.panel_count == 4 * s.panel_count and r.refinement_level == 2
    assert s.to_dict()["singularity_policy"] == "GradedMesh"
    with pytest.raises(ValueError):
        QuadratureScheme(panel_count=0)
