import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_surface_point
from fermires.errors import AtCriticalPoint, DegenerateBranch, PreconditionViolated
from fermires.geometry import (
    curvature_closed_form,
    curvature_data,
    curvature_numerator,
    graph_curvature,
    graph_derivatives,
    make_patch,
    null_eigenvector_identity,
    ordered_eig,
    transversality_check,
    zero_curvature_locus,
)
from fermires.torus import EnergyLevel, TorusPoint, h0


@pytest.mark.parametrize("lam", [2, 5, 6, 7, 10])
def test_curvature_two_routes(lam, rng):
    for _ in range(40):
        p = random_surface_point(lam, rng, axis=int(rng.integers(3)))
        patch = make_patch(p)
        K, nu = curvature_closed_form(p)
        Kg = graph_curvature(patch, patch.base_free)
        assert abs(K - Kg) <= 1e-9 * max(1.0, abs(K))
        assert abs(np.linalg.norm(nu) - 1) < 1e-14


def test_curvature_positive_near_bottom():
    # small spheres around 0 are convex
    p = random_surface_point(0.5, np.random.default_rng(1))
    assert curvature_closed_form(p)[0] > 0


def test_critical_point_rejected():
    with pytest.raises(AtCriticalPoint):
        curvature_closed_form(TorusPoint.at((0.5, 0, 0)))


def test_patch_graph_solves_level(rng):
    p = random_surface_point(5, rng)
    patch = make_patch(p)
    assert patch.radius <= 0.1
    for t in np.linspace(0, 2 * np.pi, 12, endpoint=False):
        q = patch.base_free + 0.9 * patch.radius * np.array([np.cos(t), np.sin(t)])
        assert abs(h0(patch.point(q)) - 5) < 1e-12


def test_graph_derivatives_match_finite_differences(rng):
    p = random_surface_point(7, rng)
    patch = make_patch(p)
    c = patch.base_free
    g = graph_derivatives(patch, c, 1)
    h = 1e-6
    fd = [(patch.solve(c + h * e) - patch.solve(c - h * e)) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(g, fd, atol=1e-7)
    B = graph_derivatives(patch, c, 2)
    np.testing.assert_allclose(B, B.T, atol=1e-14)


def test_degenerate_branch():
    with pytest.raises(DegenerateBranch):
        make_patch(TorusPoint.at((0.0, 0.0, 0.0)), EnergyLevel(0.0))


def test_ordered_eig_convention():
    vals, vecs = ordered_eig(np.array([[3.0, 1.0], [1.0, -0.5]]))
    assert abs(vals[0]) <= abs(vals[1])
    assert vecs[0, 0] > 0 or abs(vecs[0, 0]) < 1e-12


def test_umbilic_hessian_vanishes(umbilic_patch):
    d = curvature_data(umbilic_patch, umbilic_patch.base_free)
    assert np.max(np.abs(d.second_form)) < 1e-12
    assert abs(d.K) < 1e-12


@pytest.mark.parametrize("lam", [2, 10, 3.9, 8.1])
def test_no_flat_points_outside_band(lam):
    assert zero_curvature_locus(EnergyLevel(lam), grid=64) == []


def test_umbilics_at_six():
    pts = zero_curvature_locus(EnergyLevel(6.0), grid=64)
    assert len(pts) == 8
    expect = {tuple(x) for x in itertools.product((0.25, 0.75), repeat=3)}
    assert {tuple(round(x, 12) for x in d.point.xi) for d in pts} == expect
    assert all(d.umbilic for d in pts)


def test_locus_at_five_is_flat_and_transversal():
    pts = zero_curvature_locus(EnergyLevel(5.0), grid=32)
    assert len(pts) > 100
    for d in pts[::17]:
        assert abs(curvature_numerator(d.point)) < 1e-9
        assert abs(h0(d.point) - 5) < 1e-10
        assert not d.umbilic
        grad, ok = transversality_check(d)
        assert ok and np.linalg.norm(grad) > 0


def test_null_direction_identity_at_five():
    pts = [d.point for d in zero_curvature_locus(EnergyLevel(5.0), grid=32)
           if min(abs(a) for a in d.point.a) > 1e-6 and abs(d.point.b[2]) > 1e-6]
    assert pts
    for p in pts[::9]:
        r = null_eigenvector_identity(p)
        assert r.residual < 1e-9
        assert abs(r.directional_value - r.expected) <= 1e-8 * abs(r.expected)


def test_null_direction_requires_flat_point(rng):
    with pytest.raises(PreconditionViolated):
        null_eigenvector_identity(random_surface_point(5, rng))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 11.7), st.integers(0, 2**32 - 1))
def test_curvature_formula_property(lam, seed):
    p = random_surface_point(lam, np.random.default_rng(seed))
    try:
        patch = make_patch(p)
    except DegenerateBranch:
        return
    K = curvature_closed_form(p)[0]
    assert abs(K - graph_curvature(patch, patch.base_free)) <= 1e-9 * max(1.0, abs(K))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 11.5), st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_reflection_keeps_curvature(lam, seed, axis):
    p = random_surface_point(lam, np.random.default_rng(seed))
    K1 = curvature_closed_form(p)[0]
    K2 = curvature_closed_form(p.reflect(axis))[0]
    assert abs(K1 - K2) <= 1e-12 * max(1.0, abs(K1))


def test_null_direction_value_by_finite_differences():
    # the closed-form surface gradient of K~ against central differences along the chart
    E = EnergyLevel(5.0)
    pts = [d.point for d in zero_curvature_locus(E, grid=16) if min(abs(a) for a in d.point.a) > 1e-3]
    for p in pts[::11]:
        patch = make_patch(p, E, axis=2)
        c, h = patch.base_free, 1e-6
        g = [(curvature_numerator(patch.point(c + h * e)) - curvature_numerator(patch.point(c - h * e)))
             / (2 * h) for e in np.eye(2)]
        fd = float(np.array(p.c[:2]) @ g) / (2 * np.pi)
        assert abs(fd - null_eigenvector_identity(p).directional_value) < 1e-7
