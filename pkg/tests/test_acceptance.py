"""End-to-end acceptance checks.

Each check prints one PASS/FAIL line. Run directly with
``python tests/test_acceptance.py`` or through pytest (the decay check takes
several minutes per energy; set FERMIRES_FAST_ACCEPTANCE=1 to skip the three
long checks).
"""

import io
import itertools
import json
import math
import os
import time
from contextlib import redirect_stdout
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import dblquad

from fermires.cli import main
from fermires.geometry import make_patch, null_eigenvector_identity, zero_curvature_locus
from fermires.newton import monomial_model, newton_polyhedron
from fermires.oscillatory import CutoffSpec, decay_scan
from fermires.resolvent import holder_equivalence_test, kernel_fft, threshold_scan, uniformity_scan
from fermires.taylor import taylor_expand
from fermires.torus import TWO_PI, EnergyLevel, TorusPoint

SLOW = pytest.mark.skipif(os.environ.get("FERMIRES_FAST_ACCEPTANCE") == "1", reason="long check skipped")
RESULTS = {}


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line, flush=True)
    return ok


def cli_json(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(list(argv))
    return code, json.loads(buf.getvalue())["result"]


def check_1():
    worst, t0 = 0.0, time.perf_counter()
    for lam in (2, 5, 6, 7, 10):
        code, res = cli_json("curvature-scan", "--lambda", str(lam), "--samples", "1000", "--seed", "1")
        assert code == 0 and res["samples"] == 1000
        worst = max(worst, res["max_rel_err"])
    dt = time.perf_counter() - t0
    return report(1, worst < 1e-9 and dt < 10, f"max relative gap {worst:.2e} over 5000 points, {dt:.1f} s")


def check_2():
    quarters = {tuple(x) for x in itertools.product((0.25, 0.75), repeat=3)}
    ok, parts = True, []
    for lam in (6, 2, 10):
        t0 = time.perf_counter()
        code, res = cli_json("degenerate-locus", "--lambda", str(lam))
        dt = time.perf_counter() - t0
        got = {tuple(round(x, 12) for x in r["xi"]) for r in res["points"]}
        want = quarters if lam == 6 else set()
        ok &= code == 0 and got == want and res["count"] == len(want) and dt < 30
        parts.append(f"lambda={lam}: {res['count']} points ({dt:.1f} s)")
    return report(2, ok, "; ".join(parts))


def check_3():
    t0 = time.perf_counter()
    E = EnergyLevel(5.0)
    pts = [d.point for d in zero_curvature_locus(E) if min(abs(a) for a in d.point.a) > 1e-12]
    res_max, rel_disp, rel_neg = 0.0, 0.0, 0.0
    for p in pts:
        r = null_eigenvector_identity(p)
        e3 = p.a[0] * p.a[1] * p.a[2]
        displayed = (E.E**2 - 1) * (-e3 * E.E + 3)
        res_max = max(res_max, r.residual)
        rel_disp = max(rel_disp, abs(r.directional_value - displayed) / abs(displayed))
        rel_neg = max(rel_neg, abs(r.directional_value + displayed) / abs(displayed))
    dt = time.perf_counter() - t0
    ok = res_max < 1e-9 and rel_disp < 1e-8 and dt < 10
    return report(3, ok, f"{len(pts)} points, max |B c| {res_max:.1e}, rel. gap to displayed value "
                         f"{rel_disp:.2e} (to its negative {rel_neg:.1e}), {dt:.1f} s")


def check_4():
    t0 = time.perf_counter()
    patch = make_patch(TorusPoint.at((0.25, 0.25, 0.25)), EnergyLevel(6.0))
    m = taylor_expand(patch, patch.base_free, 5, rotate=False)
    quad = max(abs(m.coef(*k)) for k in [(2, 0), (1, 1), (0, 2)])
    diag = max(abs(m.coef(3, 0)), abs(m.coef(0, 3)))
    mixed = min(abs(m.alpha("12")), abs(m.alpha("21")))
    E = EnergyLevel(5.0)
    sp = make_patch(TorusPoint.at((0.25, math.acos(E.E) / TWO_PI, 0.25)), E, axis=2)
    s = taylor_expand(sp, sp.base_free, 5)
    small = max(abs(s.alpha(k)) for k in ("1", "111", "1111"))
    a112 = abs(s.alpha("112"))
    dt = time.perf_counter() - t0
    ok = quad < 1e-10 and mixed > 1e-3 and diag < 1e-10 and small < 1e-9 and a112 > 1e-3 and dt < 5
    return report(4, ok, f"umbilic: quadratic {quad:.1e}, diagonal cubic {diag:.1e}, mixed >= {mixed:.3f}; "
                         f"axis point: max(a1, a111, a1111) {small:.1e}, |a112| {a112:.3f}")


def check_5():
    t0 = time.perf_counter()
    fams = [({(2, 1): 1.0, (1, 2): 1.0}, Fraction(3, 2), Fraction(2, 3)),
            ({(0, 2): 1.0, (3, 0): 1.0}, Fraction(6, 5), Fraction(5, 6)),
            ({(0, 2): 1.0, (2, 1): 1.0, (4, 0): 1.0}, Fraction(4, 3), Fraction(3, 4))]
    got = [newton_polyhedron(monomial_model(c)) for c, _, _ in fams]
    ok = all(g.newton_distance == d and g.predicted_exponent == k for g, (_, d, k) in zip(got, fams))
    dt = time.perf_counter() - t0
    return report(5, ok and dt < 1, ", ".join(f"d={g.newton_distance} k={g.predicted_exponent}" for g in got)
                  + f" ({dt:.2f} s)")


def _scan(lam, point, axis=None):
    E = EnergyLevel(lam)
    patch = make_patch(point, E, axis=axis)
    cut = CutoffSpec(tuple(patch.base_free), 0.9 * patch.radius)
    t0 = time.perf_counter()
    scan = decay_scan(patch, cut, 64, 16.0, 4096.0)
    return scan, time.perf_counter() - t0


def check_6():
    E2 = EnergyLevel(2.0)
    from fermires.geometry import solve_graph

    curved = TorusPoint.at((0.1, 0.1, solve_graph((0.1, 0.1), E2, 2, 1)))
    E5 = EnergyLevel(5.0)
    generic = max(zero_curvature_locus(E5), key=lambda d: min(abs(a) for a in d.point.a)).point
    cases = [(2.0, curved, lambda k: 0.9 <= k <= 1.1),
             (6.0, TorusPoint.at((0.25, 0.25, 0.25)), lambda k: 0.62 <= k <= 0.72),
             (5.0, generic, lambda k: k >= 0.70)]
    ok, parts = True, []
    for lam, pt, rule in cases:
        scan, dt = _scan(lam, pt)
        k = scan.min_exponent
        good = rule(k) and scan.tainted_fits == 0 and dt < 600
        ok &= good
        where = "normal" if scan.fits[scan.argmin].is_normal else f"direction {scan.argmin}"
        parts.append(f"lambda={lam:g}: k={k:.3f} at {where} ({'ok' if good else 'out of range'}, {dt:.0f} s)")
    return report(6, ok, "; ".join(parts))


def _origin_oracle():
    def f(y, x):
        A = 7.0 - 2 * math.cos(2 * math.pi * x) - 2 * math.cos(2 * math.pi * y)
        return 1.0 / math.sqrt(A * A - 4.0)

    return dblquad(f, 0, 1, 0, 1, epsabs=1e-13, epsrel=1e-12)[0]


def check_7():
    t0 = time.perf_counter()
    g = kernel_fft(-1.0, 256, 16)
    r = g.apply_h0_minus_z()
    c = r.shape[0] // 2
    r[c, c, c] -= 1.0
    stencil = float(np.max(np.abs(r)))
    V = g.values
    sym = max(float(np.max(np.abs(np.transpose(V, perm)[::f[0], ::f[1], ::f[2]] - V)))
              for perm in itertools.permutations(range(3)) for f in itertools.product((1, -1), repeat=3))
    gz, gc = kernel_fft(-1.0 + 0.5j, 256, 16), kernel_fft(-1.0 - 0.5j, 256, 16)
    conj = max(float(np.max(np.abs(gz.values.conj() - gc.values))), float(np.max(np.abs(V.imag))))
    oracle = abs(g((0, 0, 0)) - _origin_oracle())
    dt = time.perf_counter() - t0
    ok = stencil < 1e-6 and sym < 1e-12 and conj < 1e-12 and oracle < 1e-7 and dt < 120
    return report(7, ok, f"stencil {stencil:.1e}, octahedral {sym:.1e}, conjugate {conj:.1e}, "
                         f"K(0) vs quadrature {oracle:.1e}, {dt:.1f} s")


def check_8():
    t0 = time.perf_counter()
    u = uniformity_scan(1.25, (8, 16))
    growth = max(abs(v) for v in u["growth"].values())
    m8, m16 = u["max_by_radius"]
    rep = threshold_scan(1.2, None, [0.4, 0.2, 0.1, 0.05, 0.025], seeds=2, section_radius=4)
    slope = rep.near_threshold_slope
    dt = time.perf_counter() - t0
    ok = (growth < 0.05 and math.isfinite(m16) and abs(m16 / m8 - 1) < 0.05 and abs(slope) <= 0.1
          and dt < 1200)
    return report(8, ok, f"max growth 8->16 {growth:.1e}, grid max {m8:.4f} -> {m16:.4f}; "
                         f"p=6/5 threshold slope {slope:+.3f}; {dt:.0f} s")


def check_9():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    excess, gap = -math.inf, -math.inf
    for p in (1.0, 1.2, 1.25, 2.0):
        for k in range(50):
            m, n = (int(v) for v in rng.integers(1, 9, 2))
            cd, cw = holder_equivalence_test(rng.standard_normal((m, n)), p, trials=10, seed=k)
            excess, gap = max(excess, cw - cd), max(gap, cd - cw)
    dt = time.perf_counter() - t0
    ok = excess <= 1e-6 and gap <= 1e-3 and dt < 300
    return report(9, ok, f"max(c_weighted - c_direct) {excess:.1e}, max(c_direct - c_weighted) {gap:.1e}, "
                         f"{dt:.0f} s")


CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6, 7: check_7, 8: check_8,
          9: check_9}


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, pytest.param(6, marks=SLOW), 7,
                               pytest.param(8, marks=SLOW), pytest.param(9, marks=SLOW)])
def test_criterion(n, capsys):
    with capsys.disabled():
        print()
        ok = CHECKS[n]()
    assert ok, RESULTS[n]


if __name__ == "__main__":
    for n, f in CHECKS.items():
        f()
