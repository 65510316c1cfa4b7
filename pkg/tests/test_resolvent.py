import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad
from scipy.signal import fftconvolve

from fermires.errors import NoConvergence, OnSpectrum
from fermires.resolvent import (
    SectionOperator,
    WeightSpec,
    finite_section_norm,
    holder_equivalence_test,
    holder_r,
    kernel,
    kernel_bessel,
    kernel_fft,
    threshold_scan,
    uniformity_grid,
    weighted_bs_norm,
)
from fermires.torus import threshold_distance


def origin_value_by_quadrature(z):
    """int dxi / (h0 - z) with the third coordinate done in closed form.

    int_0^1 dt / (A - 2 cos 2 pi t) = 1 / sqrt(A^2 - 4) for A > 2.
    """
    def f(y, x):
        A = 6.0 - z - 2 * math.cos(2 * math.pi * x) - 2 * math.cos(2 * math.pi * y)
        return 1.0 / math.sqrt(A * A - 4.0)

    return dblquad(f, 0, 1, 0, 1, epsabs=1e-13, epsrel=1e-12)[0]


@pytest.fixture(scope="module")
def g_minus1():
    return kernel_fft(-1.0, 64, 16)


def test_origin_matches_quadrature(g_minus1):
    assert abs(g_minus1((0, 0, 0)).real - origin_value_by_quadrature(-1.0)) < 1e-9


def test_stencil_reproduces_delta(g_minus1):
    r = g_minus1.apply_h0_minus_z()
    c = r.shape[0] // 2
    delta = np.zeros_like(r)
    delta[c, c, c] = 1.0
    assert np.max(np.abs(r - delta)) < 1e-10


def test_octahedral_symmetry(g_minus1):
    V = g_minus1.values
    for perm in itertools.permutations(range(3)):
        for flips in itertools.product((1, -1), repeat=3):
            W = np.transpose(V, perm)[::flips[0], ::flips[1], ::flips[2]]
            assert np.max(np.abs(W - V)) < 1e-12
    assert np.max(np.abs(V.imag)) < 1e-15


def test_real_kernel_decays(g_minus1):
    vals = [g_minus1((k, 0, 0)).real for k in range(8)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))


def test_conjugate_z():
    z = 3.0 + 0.7j
    a, b = kernel(z, box_radius=4), kernel(z.conjugate(), box_radius=4)
    assert np.max(np.abs(a.values.conj() - b.values)) < 1e-13


@pytest.mark.parametrize("z", [-1.0, 13.5, 6.0 + 1.5j, 2.0 - 1.2j])
def test_two_kernel_routes(z):
    a = kernel_fft(z, 64, 6)
    b = kernel_bessel(z, 6)
    assert np.max(np.abs(a.values - b.values)) < 1e-9


def test_bessel_route_near_spectrum():
    g = kernel_bessel(4.1 + 0.01j, 6)
    r = g.apply_h0_minus_z()
    c = r.shape[0] // 2
    r[c, c, c] -= 1.0
    assert np.max(np.abs(r)) < 1e-10


def test_on_spectrum_and_no_convergence():
    with pytest.raises(OnSpectrum):
        kernel(5.0)
    with pytest.raises(NoConvergence):
        kernel_fft(4.1 + 0.001j, 64, 4, max_n=128)


def test_resolvent_identity():
    L = 24
    k1, k2 = kernel_fft(-1.0, 128, L), kernel_fft(-2.0, 128, L)
    conv = fftconvolve(k1.values.real, k2.values.real, mode="same")
    lhs = k1((0, 0, 0)) - k2((0, 0, 0))
    assert abs(lhs - (-1.0 + 2.0) * conv[L, L, L]) < 1e-4


def test_export_format(g_minus1):
    lines = kernel_fft(-1.0, 64, 2).export_lines()
    assert len(lines) == 125
    x, y, z, re, im = lines[62].split()
    assert (x, y, z) == ("0", "0", "0") and float(re) > 0


def test_section_norms(g_minus1):
    op = SectionOperator(g_minus1, 4)
    D = op.dense()
    v = np.random.default_rng(0).standard_normal(op.size)
    assert np.max(np.abs(op.matvec(v) - D @ v)) < 1e-12
    s2 = finite_section_norm(g_minus1, 2.0, 4).value  # matrix-free route (729 > 400)
    assert abs(s2 - np.linalg.svd(D, compute_uv=False)[0]) < 1e-8 * s2
    assert finite_section_norm(g_minus1, 1.0, 4).value == pytest.approx(np.max(np.abs(D)), abs=0)
    n = [finite_section_norm(g_minus1, 1.25, r).value for r in (1, 2, 4)]
    assert n[0] <= n[1] * (1 + 1e-8) and n[1] <= n[2] * (1 + 1e-8)


def test_bs_norm_basics(g_minus1):
    d = WeightSpec([(0, 0, 0)], np.array([1.0]), 3.0)
    assert weighted_bs_norm(g_minus1, d, d) == pytest.approx(abs(g_minus1((0, 0, 0))))
    t = WeightSpec([(0, 0, 0), (1, 0, 0)], np.array([2.0, 0.5]), 3.0)
    assert weighted_bs_norm(g_minus1, t, d) == pytest.approx(
        weighted_bs_norm(g_minus1, WeightSpec(t.support, t.values / 2, 3.0), d) * 2)


def test_uniformity_grid():
    zs = uniformity_grid()
    assert len(zs) == 20 and min(threshold_distance(z) for z in zs) >= 0.5


def test_threshold_scan_small():
    rep = threshold_scan(1.2, None, [0.4, 0.2], seeds=1, section_radius=2, thresholds=(1,), restarts=2)
    assert len(rep.norms) == 4 and all(n > 0 and math.isfinite(n) for n in rep.norms)
    assert rep.r == pytest.approx(3.0)
    with pytest.raises(ValueError):
        threshold_scan(1.2, None, [0.1, 0.2])


def test_holder_r():
    assert holder_r(1.0) == 2.0 and holder_r(1.2) == pytest.approx(3.0)
    assert holder_r(1.25) == pytest.approx(10 / 3) and holder_r(2.0) == math.inf


def test_holder_identity_and_rank_one():
    assert holder_equivalence_test(np.eye(4), 2.0) == pytest.approx((1.0, 1.0))
    rng = np.random.default_rng(3)
    u, v = rng.standard_normal(4), rng.standard_normal(4)
    p = 1.25
    pd = p / (p - 1)
    direct, _ = holder_equivalence_test(np.outer(u, v), p, trials=3)
    assert direct == pytest.approx(np.linalg.norm(u, pd) * np.linalg.norm(v, pd), rel=1e-9)


@settings(max_examples=8, deadline=None)
@given(st.integers(2, 6), st.sampled_from([1.0, 1.2, 1.25, 2.0]), st.integers(0, 10**6))
def test_holder_constants_agree(n, p, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    A = A + A.T
    cd, cw = holder_equivalence_test(A, p, trials=8, seed=seed)
    assert cw <= cd + 1e-6
    assert cw >= cd - 1e-3
