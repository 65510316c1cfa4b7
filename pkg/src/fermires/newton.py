"""Newton polyhedra of bivariate phases, computed in exact rational arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import EmptySupport
from .taylor import ZERO_TOL, TaylorModel

UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class Face:
    """A face of the polyhedron: a compact edge, an unbounded ray or a vertex."""

    kind: str  # "edge", "vertex", "ray"
    start: tuple[Fraction, Fraction]
    end: tuple[Fraction, Fraction] | None = None
    direction: tuple[int, int] | None = None  # for rays

    @property
    def compact(self) -> bool:
        return self.kind != "ray"

    def contains(self, pt) -> bool:
        x, y = Fraction(pt[0]), Fraction(pt[1])
        x0, y0 = self.start
        if self.kind == "vertex":
            return (x, y) == (x0, y0)
        if self.kind == "ray":
            dx, dy = self.direction
            return (x == x0 and y >= y0) if dx == 0 else (y == y0 and x >= x0)
        x1, y1 = self.end
        on_line = (x - x0) * (y1 - y0) == (y - y0) * (x1 - x0)
        return on_line and min(x0, x1) <= x <= max(x0, x1)


@dataclass(frozen=True)
class NewtonData:
    taylor_support: frozenset
    polyhedron_vertices: list
    newton_distance: Fraction
    principal_face: Face
    principal_part: TaylorModel
    vanishing_order: int
    height: Fraction | str
    varchenko_exponent: int | None
    predicted_exponent: Fraction | str


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polyhedron_vertices(support) -> list[tuple[Fraction, Fraction]]:
    """Vertices of the hull of the union of upper quadrants, ordered by j1."""
    pts = sorted({(Fraction(i), Fraction(j)) for i, j in support})
    if not pts:
        raise EmptySupport("no monomials of degree >= 2")
    # Pareto-minimal points, increasing j1 and strictly decreasing j2
    stair = []
    for p in pts:
        if not stair or p[1] < stair[-1][1]:
            stair.append(p)
    hull: list = []
    for p in stair:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    return hull


def _principal_face(verts) -> tuple[Fraction, Face]:
    x0, y0 = verts[0]
    if x0 >= y0:  # bisectrix meets the vertical ray above the first vertex
        if x0 == y0:
            return x0, Face("vertex", verts[0])
        return x0, Face("ray", verts[0], direction=(0, 1))
    xn, yn = verts[-1]
    if yn >= xn:
        if xn == yn:
            return yn, Face("vertex", verts[-1])
        return yn, Face("ray", verts[-1], direction=(1, 0))
    for (xa, ya), (xb, yb) in zip(verts[:-1], verts[1:]):
        # x = y on the segment (xa, ya) + t (xb - xa, yb - ya)
        t = (xa - ya) / ((yb - ya) - (xb - xa))
        if 0 <= t <= 1:
            s = xa + t * (xb - xa)
            if t == 0:
                return s, Face("vertex", (xa, ya))
            if t == 1:
                return s, Face("vertex", (xb, yb))
            return s, Face("edge", (xa, ya), (xb, yb))
    raise AssertionError("bisectrix missed the polyhedron boundary")


def _circle_poly(coeffs: dict, n: int):
    theta = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    c, s = np.cos(theta), np.sin(theta)
    return theta, sum(v * c**i * s**j for (i, j), v in coeffs.items())


def vanishing_order_on_circle(principal_part: TaylorModel, samples: int = 4096,
                              simple_tol: float = 1e-8) -> int:
    """Largest multiplicity of a zero of the principal part on the unit circle.

    The restriction to the circle is a trigonometric polynomial; its Fourier
    coefficients come from the samples exactly, so angular derivatives are
    exact. Zeros are located from sign changes of the function and of its
    derivative, refined by Brent's method, and a zero has multiplicity k when
    the first k - 1 angular derivatives vanish (relative to the coefficient
    scale) and the k-th exceeds ``simple_tol``.
    """
    coeffs = {k: v for k, v in principal_part.coeffs.items() if v != 0.0}
    if not coeffs:
        raise EmptySupport("principal part is identically zero")
    scale = max(abs(v) for v in coeffs.values())
    coeffs = {k: v / scale for k, v in coeffs.items()}
    theta, g = _circle_poly(coeffs, samples)
    ghat = np.fft.rfft(g) / samples
    freqs = np.arange(len(ghat))
    deg = max(i + j for i, j in coeffs)

    def deriv(k, t):
        t = np.atleast_1d(t)
        ph = np.exp(1j * np.outer(t, freqs[: deg + 1]))
        w = ghat[: deg + 1] * (1j * freqs[: deg + 1]) ** k
        w = w * np.where(freqs[: deg + 1] == 0, 1.0, 2.0)
        return (ph @ w).real

    cands = []
    for k in (0, 1):
        vals = deriv(k, theta)
        nxt = np.roll(vals, -1)
        for idx in np.nonzero(np.sign(vals) != np.sign(nxt))[0]:
            lo, hi = theta[idx], theta[idx] + 2 * np.pi / samples
            flo, fhi = deriv(k, lo)[0], deriv(k, hi)[0]
            if flo * fhi >= 0.0:
                # an endpoint sits on the zero itself
                cands.append(lo if abs(flo) <= abs(fhi) else hi)
                continue
            cands.append(brentq(lambda t: deriv(k, t)[0], lo, hi, xtol=1e-15))
    order = 0
    for t in cands:
        if abs(deriv(0, t)[0]) > 1e-9:
            continue
        m = 1
        while m <= deg and abs(deriv(m, t)[0]) <= simple_tol:
            m += 1
        order = max(order, m)
    return order


def newton_polyhedron(model: TaylorModel, tol: float = ZERO_TOL) -> NewtonData:
    support = model.support(tol)
    if not support:
        raise EmptySupport("no coefficient of total degree >= 2 above the threshold")
    verts = polyhedron_vertices(support)
    d, face = _principal_face(verts)
    on_face = {k for k in support if face.contains(k)}
    pr = model.restricted(on_face)
    m = vanishing_order_on_circle(pr)
    data = NewtonData(frozenset(support), verts, d, face, pr, m, UNRESOLVED, None, UNRESOLVED)
    adapted, expo = adaptedness_and_exponent(data)
    if adapted:
        h = d
        return NewtonData(frozenset(support), verts, d, face, pr, m, h,
                          0 if h < 2 else None, expo)
    return data


def adaptedness_and_exponent(data: NewtonData) -> tuple[bool, Fraction | str]:
    """Adapted when the principal face is a compact edge and m(f_pr) < d(f).

    In adapted coordinates the height equals the Newton distance, and for
    height below 2 the decay exponent is its reciprocal.
    """
    adapted = data.principal_face.kind == "edge" and data.vanishing_order < data.newton_distance
    if adapted and data.newton_distance < 2:
        return True, 1 / data.newton_distance
    return adapted, UNRESOLVED


def monomial_model(coeffs: dict) -> TaylorModel:
    """A bare polynomial phase, for feeding hand-built supports through the pipeline."""
    deg = max(i + j for i, j in coeffs)
    return TaylorModel((0.0, 0.0), np.eye(2), dict(coeffs), max(deg, 2))
