from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fermires.errors import EmptySupport
from fermires.geometry import make_patch, zero_curvature_locus
from fermires.newton import (
    UNRESOLVED,
    adaptedness_and_exponent,
    monomial_model,
    newton_polyhedron,
    polyhedron_vertices,
    vanishing_order_on_circle,
)
from fermires.taylor import taylor_expand
from fermires.torus import EnergyLevel

F = Fraction



@pytest.mark.parametrize("coeffs, d, k", [
    ({(2, 1): 1.0, (1, 2): 1.0}, F(3, 2), F(2, 3)),
    ({(0, 2): 1.0, (3, 0): 1.0}, F(6, 5), F(5, 6)),
    ({(0, 2): 1.0, (2, 1): 1.0, (4, 0): 0.5}, F(4, 3), F(3, 4)),
])
def test_three_families(coeffs, d, k):
    nd = newton_polyhedron(monomial_model(coeffs))
    assert nd.newton_distance == d
    assert nd.predicted_exponent == k
    assert nd.varchenko_exponent == 0


def test_square_of_parabola_is_unresolved():
    nd = newton_polyhedron(monomial_model({(0, 2): 1.0, (2, 1): -2.0, (4, 0): 1.0}))
    assert nd.newton_distance == F(4, 3)
    assert nd.vanishing_order == 2
    assert nd.predicted_exponent == UNRESOLVED


def test_empty_support():
    with pytest.raises(EmptySupport):
        newton_polyhedron(monomial_model({(1, 0): 1.0}))


def test_vertex_face_is_not_adapted():
    nd = newton_polyhedron(monomial_model({(1, 1): 1.0}))
    assert nd.newton_distance == 1
    assert adaptedness_and_exponent(nd) == (False, UNRESOLVED)


def test_simple_zeros_on_circle():
    assert vanishing_order_on_circle(monomial_model({(2, 1): 1.0, (1, 2): 1.0})) == 1
    assert vanishing_order_on_circle(monomial_model({(2, 0): 1.0, (1, 1): -2.0, (0, 2): 1.0})) == 2


def test_surface_points(umbilic_patch):
    nd = newton_polyhedron(taylor_expand(umbilic_patch, umbilic_patch.base_free, 5, rotate=False))
    assert (nd.newton_distance, nd.predicted_exponent) == (F(3, 2), F(2, 3))
    E = EnergyLevel(5.0)
    d = max(zero_curvature_locus(E, grid=32), key=lambda d: min(abs(a) for a in d.point.a))
    patch = make_patch(d.point, E)
    nd = newton_polyhedron(taylor_expand(patch, patch.base_free, 5))
    assert (nd.newton_distance, nd.predicted_exponent) == (F(6, 5), F(5, 6))


exps = st.tuples(st.integers(0, 6), st.integers(0, 6)).filter(lambda t: sum(t) >= 2)


@given(st.sets(exps, min_size=1, max_size=8))
def test_polyhedron_properties(support):
    verts = polyhedron_vertices(support)
    # every support point lies in the region above the lower hull
    xs = [v[0] for v in verts]
    assert xs == sorted(xs) and len(set(xs)) == len(xs)
    assert all(a[1] > b[1] for a, b in zip(verts, verts[1:]))
    for v in verts:
        assert (int(v[0]), int(v[1])) in support
    nd = newton_polyhedron(monomial_model({k: 1.0 for k in support}))
    assert nd.principal_face.contains((nd.newton_distance, nd.newton_distance))
    d = nd.newton_distance
    assert d <= min(max(i, j) for i, j in support)


@given(st.sets(exps, min_size=1, max_size=8))
def test_distance_invariant_under_swap(support):
    a = newton_polyhedron(monomial_model({k: 1.0 for k in support}))
    b = newton_polyhedron(monomial_model({(j, i): 1.0 for i, j in support}))
    assert a.newton_distance == b.newton_distance
