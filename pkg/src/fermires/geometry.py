"""Graph charts, curvature and the zero-curvature locus of M_lambda.

On M_lambda = {a_1 + a_2 + a_3 = E} one coordinate (the *solved axis*) is a
function f of the other two (the *free* coordinates). All derivative formulas
below are written in terms of the trigonometric values at the surface point,
with ``b_s`` the sine on the solved axis.

Axes are 0-based throughout (0, 1, 2 for xi_1, xi_2, xi_3).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    AtCriticalPoint,
    DegenerateBranch,
    OutOfRange,
    OutsidePatch,
    PreconditionViolated,
)
from .torus import TWO_PI, EnergyLevel, TorusPoint, _trig, h0

FOUR_PI2 = 4.0 * math.pi**2
BRANCH_TOL = 1e-12
UMBILIC_TOL = 1e-8
MAX_PATCH_RADIUS = 0.1


def free_axes(axis: int) -> tuple[int, int]:
    return tuple(j for j in range(3) if j != axis)


def _wrap_signed(x):
    """Reduce to [-1/2, 1/2)."""
    return (np.asarray(x) + 0.5) % 1.0 - 0.5


def solve_graph(xi_free: Sequence[float], energy: EnergyLevel, axis: int, branch: int) -> float:
    """Solve a_axis = E - (sum of free a's) for the coordinate on ``axis``.

    ``branch`` is the sign of sin 2 pi xi_axis on the chosen sheet.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    a_free = [_trig(float(x) % 1.0)[0] for x in xi_free]
    a_s = energy.E - a_free[0] - a_free[1]
    if abs(a_s) > 1.0 + BRANCH_TOL:
        raise OutOfRange(f"a_{axis} = {a_s:.6g} is outside [-1, 1]")
    if abs(abs(a_s) - 1.0) <= BRANCH_TOL:
        raise DegenerateBranch(f"a_{axis} = {a_s:.17g}; sin vanishes on the solved axis")
    theta = math.acos(a_s) / TWO_PI
    return theta if branch > 0 else 1.0 - theta


def solve_graph_array(xi1, xi2, E: float, branch: int):
    """Vectorised :func:`solve_graph`; entries off the surface come back NaN."""
    a_s = E - np.cos(TWO_PI * np.asarray(xi1)) - np.cos(TWO_PI * np.asarray(xi2))
    with np.errstate(invalid="ignore"):
        ok = np.abs(a_s) < 1.0 - BRANCH_TOL
        theta = np.where(ok, np.arccos(np.clip(a_s, -1.0, 1.0)) / TWO_PI, np.nan)
    return theta if branch > 0 else (1.0 - theta) % 1.0


@dataclass(frozen=True)
class FermiPatch:
    """Local graph chart of M_lambda around ``base``.

    The surface is {xi_axis = f(xi_free)} for free coordinates within ``radius``
    of the base's free coordinates.
    """

    energy: EnergyLevel
    axis: int
    branch: int
    base: TorusPoint
    radius: float

    @property
    def free(self) -> tuple[int, int]:
        return free_axes(self.axis)

    @property
    def base_free(self) -> np.ndarray:
        return np.array([self.base.xi[j] for j in self.free])

    def offset(self, xi_free) -> np.ndarray:
        return _wrap_signed(np.asarray(xi_free, float) - self.base_free)

    def contains(self, xi_free) -> bool:
        return float(np.linalg.norm(self.offset(xi_free))) <= self.radius * (1.0 + 1e-12)

    def solve(self, xi_free) -> float:
        if not self.contains(xi_free):
            raise OutsidePatch(f"{tuple(xi_free)} is outside the chart radius {self.radius:.4g}")
        return solve_graph(xi_free, self.energy, self.axis, self.branch)

    def point(self, xi_free) -> TorusPoint:
        xs = self.solve(xi_free)
        xi = [0.0, 0.0, 0.0]
        i, j = self.free
        xi[i], xi[j], xi[self.axis] = float(xi_free[0]), float(xi_free[1]), xs
        return TorusPoint.at(xi)

    def chart_coords(self, p: TorusPoint) -> np.ndarray:
        return np.array([p.xi[j] for j in self.free])

    def reflect(self, axis: int) -> "FermiPatch":
        """Image of the patch under xi_axis -> -xi_axis."""
        branch = -self.branch if axis == self.axis else self.branch
        return FermiPatch(self.energy, self.axis, branch, self.base.reflect(axis), self.radius)


def _chart_ok(base_free, radius, energy, axis, branch, bs0, n=64):
    t = np.linspace(0.0, TWO_PI, n, endpoint=False)
    x1 = base_free[0] + radius * np.cos(t)
    x2 = base_free[1] + radius * np.sin(t)
    xs = solve_graph_array(x1, x2, energy.E, branch)
    if np.any(np.isnan(xs)):
        return False
    return bool(np.all(np.abs(np.sin(TWO_PI * xs)) > 0.5 * abs(bs0)))


def make_patch(
    p: TorusPoint,
    energy: EnergyLevel | None = None,
    axis: int | None = None,
    max_radius: float = MAX_PATCH_RADIUS,
) -> FermiPatch:
    """Chart of the Fermi surface through ``p``.

    The solved axis defaults to the one with largest |b_j| (smallest index on
    ties). The radius is the largest r <= ``max_radius`` for which 64 samples
    on the chart boundary solve on the same branch with |b_axis| above half
    its base value.
    """
    if energy is None:
        energy = EnergyLevel(h0(p))
    elif abs(h0(p) - energy.lam) > 1e-10:
        raise PreconditionViolated(f"h0(p) = {h0(p):.15g} differs from lambda = {energy.lam}")
    if axis is None:
        axis = int(np.argmax(np.abs(p.b)))
    bs = p.b[axis]
    if abs(bs) <= 1e-8:
        raise DegenerateBranch(f"|b_{axis}| = {abs(bs):.3g} too small to solve for axis {axis}")
    branch = 1 if bs > 0 else -1
    fa = free_axes(axis)
    base_free = np.array([p.xi[j] for j in fa])
    # rebuild the base from the graph solve so it lies exactly on the chart
    xs = solve_graph(base_free, energy, axis, branch)
    xi = list(p.xi)
    xi[axis] = xs
    base = TorusPoint.at(xi)
    bs0 = base.b[axis]

    if _chart_ok(base_free, max_radius, energy, axis, branch, bs0):
        return FermiPatch(energy, axis, branch, base, max_radius)
    lo, hi = 0.0, max_radius
    r = max_radius
    while r > 1e-6:
        r *= 0.7
        if _chart_ok(base_free, r, energy, axis, branch, bs0):
            lo, hi = r, r / 0.7
            break
    else:
        raise DegenerateBranch("no admissible chart radius around the base point")
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if _chart_ok(base_free, mid, energy, axis, branch, bs0):
            lo = mid
        else:
            hi = mid
    return FermiPatch(energy, axis, branch, base, lo)


# ---------------------------------------------------------------------------
# curvature


def curvature_closed_form(p: TorusPoint) -> tuple[float, np.ndarray]:
    """Gaussian curvature and unit normal of the level surface through ``p``."""
    a, b = p.a, p.b
    nb2 = b[0] ** 2 + b[1] ** 2 + b[2] ** 2
    if math.sqrt(nb2) < 1e-10:
        raise AtCriticalPoint(f"{p.xi} is a critical point of h0")
    num = a[0] * a[1] * b[2] ** 2 + a[1] * a[2] * b[0] ** 2 + a[2] * a[0] * b[1] ** 2
    return FOUR_PI2 * num / nb2**2, np.array(b) / math.sqrt(nb2)


def curvature_numerator(p: TorusPoint) -> float:
    """a1 a2 b3^2 + a2 a3 b1^2 + a3 a1 b2^2, which vanishes exactly where K does."""
    a, b = p.a, p.b
    return a[0] * a[1] * b[2] ** 2 + a[1] * a[2] * b[0] ** 2 + a[2] * a[0] * b[1] ** 2


def _derivs_at(p: TorusPoint, axis: int, order: int):
    i, j = free_axes(axis)
    a_s, b_s = p.a[axis], p.b[axis]
    af = np.array([p.a[i], p.a[j]])
    bf = np.array([p.b[i], p.b[j]])
    f1 = -bf / b_s
    if order == 1:
        return f1
    f2 = -TWO_PI * (np.diag(af) + a_s * np.outer(f1, f1)) / b_s
    if order == 2:
        return f2
    d3 = np.zeros((2, 2, 2))
    d3[0, 0, 0], d3[1, 1, 1] = bf
    sym = (
        np.einsum("km,l->klm", f2, f1)
        + np.einsum("lm,k->klm", f2, f1)
        + np.einsum("kl,m->klm", f2, f1)
    )
    f3 = (FOUR_PI2 * d3 + FOUR_PI2 * b_s * np.einsum("k,l,m->klm", f1, f1, f1)
          - TWO_PI * a_s * sym) / b_s
    return f3


def graph_derivatives(patch: FermiPatch, xi_free, order: int) -> np.ndarray:
    """Derivatives of the chart function f at ``xi_free``.

    order 1 -> gradient (2,), order 2 -> Hessian B (2, 2), order 3 -> symmetric
    tensor (2, 2, 2).
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    return _derivs_at(patch.point(xi_free), patch.axis, order)


def graph_curvature(patch: FermiPatch, xi_free) -> float:
    """Gaussian curvature from the chart: det(Hess f) / (1 + |grad f|^2)^2."""
    p = patch.point(xi_free)
    g = _derivs_at(p, patch.axis, 1)
    B = _derivs_at(p, patch.axis, 2)
    return float(np.linalg.det(B) / (1.0 + g @ g) ** 2)


def ordered_eig(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric 2x2 matrix, smaller |eigenvalue| first.

    Columns of the returned matrix are unit eigenvectors whose first
    component above 1e-12 in size is positive.
    """
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(np.abs(vals), kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    for k in range(2):
        v = vecs[:, k]
        lead = v[np.abs(v) > 1e-12][0]
        if lead < 0:
            vecs[:, k] = -v
    return vals, vecs


@dataclass(frozen=True)
class CurvatureData:
    K: float
    nu: np.ndarray
    second_form: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray


def curvature_data(patch: FermiPatch, xi_free) -> CurvatureData:
    p = patch.point(xi_free)
    K, nu = curvature_closed_form(p)
    B = _derivs_at(p, patch.axis, 2)
    vals, vecs = ordered_eig(B)
    return CurvatureData(K, nu, B, vals, vecs)


# ---------------------------------------------------------------------------
# zero-curvature locus


@dataclass(frozen=True)
class DegenerateLocusPoint:
    point: TorusPoint
    energy: float
    umbilic: bool
    transversal: bool


def transversality_check(p: TorusPoint | DegenerateLocusPoint) -> tuple[np.ndarray, bool]:
    """(b1, b2, b3) x grad K~ from its closed form, and whether it is nonzero.

    K~ = a1 a2 b3^2 + a2 a3 b1^2 + a3 a1 b2^2 is the curvature numerator.
    """
    if isinstance(p, DegenerateLocusPoint):
        p = p.point
    a, b = p.a, p.b
    S = a[0] + a[1] + a[2]
    cross = -TWO_PI * np.array([
        b[1] * b[2] * (a[1] - a[2]) * (1.0 - a[0] * S),
        b[2] * b[0] * (a[2] - a[0]) * (1.0 - a[1] * S),
        b[0] * b[1] * (a[0] - a[1]) * (1.0 - a[2] * S),
    ])
    return cross, bool(np.linalg.norm(cross) > 1e-8)


def _cubic_discriminant(E: float) -> np.ndarray:
    # disc of t^3 - E t^2 + E s t - s as a polynomial in s (highest first)
    return np.array([-4.0 * E**3, E**4 + 18.0 * E**2 - 27.0, -4.0 * E**3, 0.0])


def _real_roots_in_box(E: float, s: float, tol: float = 1e-7):
    r = np.roots([1.0, -E, E * s, -s])
    if np.any(np.abs(r.imag) > tol):
        return None
    r = r.real
    if np.any(np.abs(r) > 1.0 + tol):
        return None
    return np.clip(r, -1.0, 1.0)


def _admissible_parameters(E: float, grid: int) -> list[float]:
    """Values of s = a1 a2 a3 for which the symmetric system has a real solution.

    On the locus, a1, a2, a3 are the roots of t^3 - E t^2 + E s t - s, so the
    locus is swept by the single parameter s over the set where all three roots
    are real and lie in [-1, 1].
    """
    br = {-1.0, 0.0, 1.0}
    for r in np.roots(_cubic_discriminant(E)[:-1]) if E != 0 else []:
        if abs(r.imag) < 1e-12 and -1.0 <= r.real <= 1.0:
            br.add(float(r.real))
    br = sorted(br)
    out: list[float] = []
    for s in br:
        if _real_roots_in_box(E, s) is not None:
            out.append(s)
    for lo, hi in zip(br[:-1], br[1:]):
        if _real_roots_in_box(E, 0.5 * (lo + hi)) is not None:
            out.extend(np.linspace(lo, hi, grid)[1:-1].tolist())
    return sorted(set(out))


def _polish(xi: np.ndarray, E: float, iters: int = 30) -> np.ndarray:
    """Gauss-Newton onto {sum a = E, K~ = 0}, minimum-norm steps, batched."""
    xi = xi.copy()
    for _ in range(iters):
        a = np.cos(TWO_PI * xi)
        b = np.sin(TWO_PI * xi)
        F = np.stack([a.sum(axis=1) - E, _numerator_arr(a, b)], axis=1)
        if np.max(np.abs(F)) < 1e-15:
            break
        J = np.stack([-TWO_PI * b, _numerator_grad(a, b)], axis=1)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J, rcond=1e-10), F)
        xi -= step
    return xi % 1.0


def _numerator_arr(a, b):
    return (a[:, 0] * a[:, 1] * b[:, 2] ** 2 + a[:, 1] * a[:, 2] * b[:, 0] ** 2
            + a[:, 2] * a[:, 0] * b[:, 1] ** 2)


def _numerator_grad(a, b):
    # d a_j = -2 pi b_j, d (b_j^2) = 4 pi a_j b_j
    g = np.empty_like(a)
    for j in range(3):
        k, m = [x for x in range(3) if x != j]
        # terms containing a_j: a_j a_k b_m^2 + a_j a_m b_k^2 ; term containing b_j^2: a_k a_m b_j^2
        g[:, j] = (-TWO_PI * b[:, j] * (a[:, k] * b[:, m] ** 2 + a[:, m] * b[:, k] ** 2)
                   + 2.0 * TWO_PI * a[:, j] * b[:, j] * a[:, k] * a[:, m])
    return g


def zero_curvature_locus(energy: EnergyLevel, grid: int = 256) -> list[DegenerateLocusPoint]:
    """Points of M_lambda where the Gaussian curvature vanishes.

    The locus is swept through the parameter s = a1 a2 a3 (``grid`` samples on
    each admissible interval, plus isolated admissible values), each root
    triple is lifted to the torus by all sign choices, polished by Gauss-Newton
    and deduplicated within torus distance 1e-6. Output is sorted by
    coordinates.
    """
    if not 0.0 < energy.lam < 12.0:
        raise PreconditionViolated("lambda must lie in (0, 12)")
    E = energy.E
    triples = []
    for s in _admissible_parameters(E, grid):
        r = _real_roots_in_box(E, s)
        if r is None:
            continue
        for perm in set(itertools.permutations(r.tolist())):
            triples.append(perm)
    if not triples:
        return []
    lifts = []
    for t in triples:
        th = [math.acos(v) / TWO_PI for v in t]
        opts = [sorted({x, (1.0 - x) % 1.0}) for x in th]
        lifts.extend(itertools.product(*opts))
    xi = np.array(lifts, dtype=float)
    xi = _polish(xi, E)

    pts = [TorusPoint.at(x) for x in xi]
    keep = []
    for p in pts:
        if np.linalg.norm(p.b) < 1e-10:
            continue
        K, _ = curvature_closed_form(p)
        if abs(K) < 1e-9 and abs(h0(p) - energy.lam) < 1e-10:
            keep.append(p)
    if not keep:
        return []
    coords = np.array([p.xi for p in keep])
    tree = cKDTree(coords, boxsize=1.0 + 1e-15)
    drop = set()
    for i, j in sorted(tree.query_pairs(1e-6)):
        if i not in drop:
            drop.add(j)
    keep = [p for k, p in enumerate(keep) if k not in drop]
    keep.sort(key=lambda p: p.xi)

    out = []
    for p in keep:
        axis = int(np.argmax(np.abs(p.b)))
        B = _derivs_at(p, axis, 2)
        _, transversal = transversality_check(p)
        out.append(DegenerateLocusPoint(p, energy.lam, bool(np.linalg.norm(B) < UMBILIC_TOL), transversal))
    return out


# ---------------------------------------------------------------------------
# null eigenvector of the Hessian on the degenerate locus


@dataclass(frozen=True)
class NullDirectionReport:
    residual: float           # |B (c1, c2)|
    directional_value: float  # (c1, c2) . grad K~ along the surface, divided by 2 pi
    expected: float           # (1 - E^2)(3 - a1 a2 a3 E)
    orthogonality: float      # b . c


def null_eigenvector_identity(p: TorusPoint) -> NullDirectionReport:
    """Check that (c1, c2) spans the kernel of the chart Hessian (chart over xi_3).

    The directional derivative uses the closed-form surface gradient
    d_j K~ = 2 pi b_j (a_j - a_3)(1 - a_k E), {j, k} = {1, 2}. On the locus it
    equals (1 - E^2)(3 - a1 a2 a3 E), which is nonzero for E in (-1, 1).
    """
    a, b = p.a, p.b
    E = a[0] + a[1] + a[2]
    if any(cj is None for cj in p.c) or min(abs(x) for x in a) < 1e-12:
        raise PreconditionViolated("all a_j must be nonzero")
    if abs(b[2]) < 1e-12:
        raise PreconditionViolated("b_3 vanishes; the chart over xi_3 is invalid")
    if not -1.0 < E < 1.0 or abs(E) < 1e-12:
        raise PreconditionViolated(f"E = {E:.6g} outside (-1, 1) minus {{0}}")
    K, _ = curvature_closed_form(p)
    if abs(K) > 1e-8:
        raise PreconditionViolated(f"K = {K:.3g}; point is not on the zero-curvature locus")
    c = np.array(p.c, dtype=float)
    B = _derivs_at(p, 2, 2)
    residual = float(np.linalg.norm(B @ c[:2]))
    grad = TWO_PI * np.array([
        b[0] * (a[0] - a[2]) * (1.0 - a[1] * E),
        b[1] * (a[1] - a[2]) * (1.0 - a[0] * E),
    ])
    value = float(c[:2] @ grad) / TWO_PI
    e3 = a[0] * a[1] * a[2]
    return NullDirectionReport(residual, value, (1.0 - E**2) * (3.0 - e3 * E), float(np.dot(b, c)))
