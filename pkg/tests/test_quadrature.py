import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wglift import generate_quad_mesh, generate_wedge_mesh
from wglift.quadrature import (MAX_DEGREE, cell_rule, face_rule,
                               facet_quadrature, simplex_quadrature,
                               simplex_rule)


def monomial_integral_simplex(expo):
    """Exact integral of x^a y^b z^c over the unit reference simplex:
    prod(a_i!) / (|a| + d)!  (brute-force oracle)."""
    d = len(expo)
    num = 1
    for a in expo:
        num *= math.factorial(a)
    return num / math.factorial(sum(expo) + d)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_weights_sum_to_measure(dim):
    for degree in range(1, MAX_DEGREE + 1):
        rule = simplex_rule(dim, degree)
        assert rule.weights.sum() == pytest.approx(1.0 / math.factorial(dim), rel=1e-13)
        # all points inside the closed simplex
        assert np.all(rule.points >= -1e-14)
        assert np.all(rule.points.sum(axis=1) <= 1 + 1e-14)


def test_reference_examples():
    r = simplex_rule(2, 2)
    assert r.integrate(r.points[:, 0] ** 2) == pytest.approx(1 / 12, rel=1e-13)
    r = simplex_rule(1, 3)
    assert r.integrate(r.points[:, 0] ** 3) == pytest.approx(0.25, rel=1e-13)
    r = simplex_rule(3, 2)
    assert r.weights.sum() == pytest.approx(1 / 6, rel=1e-13)


def test_degree_range_errors():
    with pytest.raises(ValueError):
        simplex_rule(2, 0)
    with pytest.raises(ValueError):
        simplex_rule(2, MAX_DEGREE + 1)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("degree", [1, 3, 6, 10, 14])
def test_monomial_exactness_vs_oracle(dim, degree):
    rule = simplex_rule(dim, degree)
    for total in range(degree + 1):
        for expo in _exponents(dim, total):
            val = rule.integrate(np.prod(rule.points ** np.array(expo), axis=1))
            assert val == pytest.approx(monomial_integral_simplex(expo), rel=1e-12)


def _exponents(dim, total):
    if dim == 1:
        yield (total,)
        return
    for a in range(total + 1):
        for rest in _exponents(dim - 1, total - a):
            yield (a,) + rest


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 10), st.data())
def test_random_polynomial_property(dim, degree, data):
    """Quadrature matches the analytic monomial oracle on random polynomials."""
    rule = simplex_rule(dim, degree)
    terms = []
    for total in range(degree + 1):
        terms.extend(_exponents(dim, total))
    coeffs = [data.draw(st.floats(-10, 10)) for _ in terms]
    vals = sum(c * np.prod(rule.points ** np.array(e), axis=1)
               for c, e in zip(coeffs, terms))
    exact = sum(c * monomial_integral_simplex(e) for c, e in zip(coeffs, terms))
    assert rule.integrate(vals) == pytest.approx(exact, rel=1e-12, abs=1e-12)


def test_mapped_simplex():
    verts = np.array([[1.0, 2.0], [3.0, 2.5], [1.5, 4.0]])
    rule = simplex_quadrature(verts, 4)
    e1, e2 = verts[1] - verts[0], verts[2] - verts[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    assert rule.weights.sum() == pytest.approx(area, rel=1e-13)


def test_cell_rule_unit_square():
    mesh = generate_quad_mesh(1)
    # level-1 corner cell has unperturbed outer vertices; integrate over all
    total = sum(cell_rule(mesh, c, 3).weights.sum() for c in range(mesh.n_cells))
    assert total == pytest.approx(1.0, rel=1e-13)
    rule = cell_rule(mesh, 0, 3)
    xy = rule.integrate(rule.points[:, 0] * rule.points[:, 1])
    # integral of xy over the cell, compared against a finer rule
    fine = cell_rule(mesh, 0, 8)
    assert xy == pytest.approx(fine.integrate(fine.points[:, 0] * fine.points[:, 1]),
                               rel=1e-13)


def test_cell_rule_wedge_volume():
    mesh = generate_wedge_mesh(1)
    rule = cell_rule(mesh, 0, 2)
    assert rule.weights.sum() == pytest.approx(mesh.cells[0].measure, rel=1e-13)
    assert rule.weights.sum() == pytest.approx(0.5 ** 3 / 2, rel=1e-13)


def test_face_rule_examples():
    seg = facet_quadrature(np.array([[0.0, 0.0], [1.0, 0.0]]), 3)
    assert seg.integrate(seg.points[:, 0]) == pytest.approx(0.5, rel=1e-13)
    k = 2
    seg = facet_quadrature(np.array([[0.0, 0.0], [1.0, 0.0]]), 2 * k + 4)
    val = seg.integrate(seg.points[:, 0] ** (2 * k + 4))
    assert val == pytest.approx(1.0 / (2 * k + 5), rel=1e-13)
    mesh = generate_wedge_mesh(1)
    fid = next(iter(range(mesh.n_faces)))
    rule = face_rule(mesh, fid, 2)
    assert rule.weights.sum() == pytest.approx(mesh.faces[fid].measure, rel=1e-13)
