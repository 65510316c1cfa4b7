"""Taylor expansions of chart functions and their normal-form classification.

Coefficients are computed by truncated bivariate power-series arithmetic on the
level-set equation cos 2 pi f = E - cos 2 pi xi_1 - cos 2 pi xi_2, which is
exact up to rounding at every order. A Richardson-extrapolated finite
difference route (``method="fd"``) is kept as an independent check.

Coefficient ``(j1, j2)`` multiplies eta_1**j1 * eta_2**j2, so it is the
partial derivative divided by j1! j2!.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .errors import EigenvalueCollision, OutsidePatch, UnclassifiedPoint
from .geometry import FermiPatch, _derivs_at, ordered_eig, solve_graph_array
from .torus import TWO_PI, EnergyLevel, TorusPoint, _trig

ZERO_TOL = 1e-10
CONSTRAINT_TOL = 1e-8


# ---------------------------------------------------------------------------
# truncated bivariate power series, stored as (D+1, D+1) arrays


def _mask(D: int) -> np.ndarray:
    i, j = np.indices((D + 1, D + 1))
    return (i + j) <= D


def _mul(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    D = x.shape[0] - 1
    return convolve2d(x, y)[: D + 1, : D + 1] * _mask(D)


def _cos_sin_nilpotent(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """cos t and sin t for a series with zero constant term."""
    D = t.shape[0] - 1
    c = np.zeros_like(t)
    s = np.zeros_like(t)
    c[0, 0] = 1.0
    power = c.copy()
    for k in range(1, D + 1):
        power = _mul(power, t) / k
        if k % 2:
            s += (-1) ** (k // 2) * power
        else:
            c += (-1) ** (k // 2) * power
    return c, s


def _jet_coefficients(patch: FermiPatch, center, U: np.ndarray, D: int) -> np.ndarray:
    """Series of eta -> f(center + U eta) to total degree D."""
    p = patch.point(center)
    E = patch.energy.E
    a_s, b_s = p.a[patch.axis], p.b[patch.axis]
    u = np.zeros((D + 1, D + 1))
    u[0, 0] = E
    for k, ax in enumerate(patch.free):
        lin = np.zeros((D + 1, D + 1))
        if D >= 1:
            lin[1, 0], lin[0, 1] = TWO_PI * U[k, 0], TWO_PI * U[k, 1]
        c, s = _cos_sin_nilpotent(lin)
        ak, bk = p.a[ax], p.b[ax]
        u -= ak * c - bk * s
    v = u.copy()
    v[0, 0] -= a_s
    v[0, 0] = 0.0  # the center lies on the surface
    # a_s (cos 2 pi d - 1) - b_s (sin 2 pi d - 2 pi d) - 2 pi b_s d = v
    delta = np.zeros((D + 1, D + 1))
    for _ in range(D + 1):
        c, s = _cos_sin_nilpotent(TWO_PI * delta)
        c[0, 0] -= 1.0
        nonlin = a_s * c - b_s * (s - TWO_PI * delta)
        delta = (nonlin - v) / (TWO_PI * b_s)
    delta[0, 0] = p.xi[patch.axis]
    return delta * _mask(D)


def _central_weights(n: int) -> tuple[np.ndarray, np.ndarray]:
    m = (n + 1) // 2
    nodes = np.arange(-m, m + 1, dtype=float)
    V = np.vander(nodes, increasing=True).T
    rhs = np.zeros(len(nodes))
    rhs[n] = math.factorial(n)
    return nodes, np.linalg.solve(V, rhs)


def _fd_coefficients(patch: FermiPatch, center, U: np.ndarray, D: int,
                     steps=(1e-2, 5e-3, 2.5e-3)) -> np.ndarray:
    base = np.asarray(center, float)
    xs0 = patch.solve(center)

    def g(e1, e2):
        x = base[:, None, None] + U[:, :1, None] * e1 + U[:, 1:, None] * e2
        xs = solve_graph_array(x[0], x[1], patch.energy.E, patch.branch)
        return ((xs - xs0 + 0.5) % 1.0) - 0.5

    out = np.zeros((D + 1, D + 1))
    out[0, 0] = xs0
    for j1 in range(D + 1):
        for j2 in range(D + 1 - j1):
            if j1 + j2 == 0:
                continue
            n1, w1 = _central_weights(j1)
            n2, w2 = _central_weights(j2)
            est = []
            for h in steps:
                vals = g(n1[:, None] * h, n2[None, :] * h)
                est.append(float(w1 @ vals @ w2) / h ** (j1 + j2))
            # two Richardson sweeps on an h^2, h^4 error expansion
            r1 = [(4 * est[k + 1] - est[k]) / 3 for k in range(2)]
            d = (16 * r1[1] - r1[0]) / 15
            out[j1, j2] = d / (math.factorial(j1) * math.factorial(j2))
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaylorModel:
    """Coefficients of eta -> f(base + rotation @ eta) up to ``degree``."""

    base: tuple[float, float]
    rotation: np.ndarray
    coeffs: dict
    degree: int
    point: TorusPoint | None = field(default=None, repr=False)
    eigvals: tuple[float, float] | None = None

    def coef(self, j1: int, j2: int) -> float:
        return self.coeffs.get((j1, j2), 0.0)

    def alpha(self, name: str) -> float:
        """Normal-form coefficients named by their eta index strings.

        '1', '2' are the squares; three indices carry the symmetric-tensor
        weight (so '112' is coef(2, 1) / 3); four indices name the plain
        monomial coefficient; '12' and '21' are the cubic mixed terms
        without symmetrisation.
        """
        if name in ("1", "2"):
            return self.coef(2, 0) if name == "1" else self.coef(0, 2)
        if name in ("12", "21"):
            return self.coef(2, 1) if name == "12" else self.coef(1, 2)
        j1, j2 = name.count("1"), name.count("2")
        if len(name) == 3:
            return self.coef(j1, j2) / math.comb(3, j2)
        return self.coef(j1, j2)

    def support(self, tol: float = ZERO_TOL) -> set[tuple[int, int]]:
        """Bi-indices of nonzero coefficients, constant and linear terms excluded."""
        return {k for k, v in self.coeffs.items() if sum(k) >= 2 and abs(v) > tol}

    def swapped(self) -> "TaylorModel":
        R = self.rotation[:, ::-1].copy()
        return TaylorModel(self.base, R, {(j, i): v for (i, j), v in self.coeffs.items()},
                           self.degree, self.point)

    def scaled(self, t: float) -> "TaylorModel":
        return TaylorModel(self.base, self.rotation, {k: t * v for k, v in self.coeffs.items()},
                           self.degree, self.point)

    def restricted(self, keys) -> "TaylorModel":
        keys = set(keys)
        return TaylorModel(self.base, self.rotation,
                           {k: v for k, v in self.coeffs.items() if k in keys}, self.degree, self.point)

    def __call__(self, eta1, eta2):
        out = 0.0
        for (i, j), v in self.coeffs.items():
            out = out + v * np.power(eta1, i) * np.power(eta2, j)
        return out


def taylor_expand(
    patch: FermiPatch,
    center,
    degree: int = 5,
    rotate: bool = True,
    method: str = "series",
) -> TaylorModel:
    """Expand the chart function of ``patch`` around ``center``.

    With ``rotate`` the expansion variables are eta = U^T (xi' - center),
    where the columns of U are the eigenvectors of the Hessian at the
    center, smaller |eigenvalue| first. ``method`` is "series" (power-series
    arithmetic) or "fd" (Richardson-extrapolated central differences).
    """
    if not 2 <= degree <= 6:
        raise ValueError("degree must lie in [2, 6]")
    center = tuple(float(x) for x in center)
    if not patch.contains(center):
        raise OutsidePatch(f"{center} is outside the chart")
    p = patch.point(center)
    B = _derivs_at(p, patch.axis, 2)
    vals, vecs = ordered_eig(B)
    if rotate:
        if abs(vals[0] - vals[1]) < 1e-10:
            raise EigenvalueCollision(f"Hessian eigenvalues {vals[0]:.3g}, {vals[1]:.3g} coincide")
        U = vecs
    else:
        U = np.eye(2)
    if method == "series":
        arr = _jet_coefficients(patch, center, U, degree)
    elif method == "fd":
        arr = _fd_coefficients(patch, center, U, degree)
    else:
        raise ValueError(f"unknown method {method!r}")
    coeffs = {(i, j): float(arr[i, j]) for i in range(degree + 1) for j in range(degree + 1 - i)}
    return TaylorModel(center, U, coeffs, degree, p, (float(vals[0]), float(vals[1])))


# ---------------------------------------------------------------------------
# normal forms


class CaseTag(enum.Enum):
    UMBILIC_CUBIC = "umbilic-cubic"
    GENERIC_DEGENERATE = "generic-degenerate"
    SPECIAL_AXIS_POINT = "special-axis-point"


@dataclass(frozen=True)
class NormalFormCase:
    case_tag: CaseTag
    verified_constraints: list  # (name, residual), each below CONSTRAINT_TOL
    nonzero: list = field(default_factory=list)  # (name, value) that must be nonzero
    notes: list = field(default_factory=list)


def _axis_pattern(p: TorusPoint, E: float, tol: float = 1e-8) -> bool:
    a = np.array(p.a)
    return any(
        abs(a[k] - E) < tol and all(abs(a[j]) < tol for j in range(3) if j != k) for k in range(3)
    )


def classify_normal_form(model: TaylorModel, energy: EnergyLevel) -> NormalFormCase:
    """Match an expansion at a zero-curvature point against the known normal forms."""
    if model.degree < 4:
        raise ValueError("classification needs degree >= 4")
    tol = CONSTRAINT_TOL
    quad = [("alpha_1", model.coef(2, 0)), ("alpha_2", model.coef(0, 2)), ("cross", model.coef(1, 1))]

    if abs(energy.lam - 6.0) < 1e-12 and all(abs(v) < tol for _, v in quad):
        eqs = quad + [("alpha_111", model.coef(3, 0)), ("alpha_222", model.coef(0, 3))]
        nz = [("alpha_12", model.alpha("12")), ("alpha_21", model.alpha("21"))]
        if all(abs(v) < tol for _, v in eqs) and all(abs(v) > tol for _, v in nz):
            return NormalFormCase(CaseTag.UMBILIC_CUBIC, [(n, abs(v)) for n, v in eqs], nz)
        raise UnclassifiedPoint("vanishing quadratic part without the umbilic cubic structure")

    a1, a2 = model.alpha("1"), model.alpha("2")
    if abs(model.coef(1, 1)) > tol or not (abs(a1) < tol < abs(a2)):
        raise UnclassifiedPoint(
            f"quadratic part ({a1:.3g}, {model.coef(1, 1):.3g}, {a2:.3g}) is not rank one along eta_2"
        )
    a111, a112, a1111 = model.alpha("111"), model.alpha("112"), model.alpha("1111")
    eqs = [("alpha_1", abs(a1)), ("cross", abs(model.coef(1, 1)))]
    if abs(a111) < tol:
        if abs(a1111) < tol and abs(a112) > tol:
            eqs += [("alpha_111", abs(a111)), ("alpha_1111", abs(a1111))]
            nz = [("alpha_2", a2), ("alpha_112", a112)]
            if model.point is not None and _axis_pattern(model.point, energy.E):
                return NormalFormCase(CaseTag.SPECIAL_AXIS_POINT, eqs, nz)
            return NormalFormCase(CaseTag.GENERIC_DEGENERATE, eqs, nz,
                                  ["alpha_111 vanishes away from the axis points"])
        if abs(a1111) >= tol:
            return NormalFormCase(
                CaseTag.GENERIC_DEGENERATE, eqs, [("alpha_2", a2)],
                ["alpha_111 = 0 with alpha_1111 != 0: outside the hypotheses of the decay estimate"],
            )
        raise UnclassifiedPoint("alpha_111 and alpha_112 both vanish")
    return NormalFormCase(CaseTag.GENERIC_DEGENERATE, eqs, [("alpha_2", a2), ("alpha_111", a111)])


def eigen_derivative_identities(patch: FermiPatch, center, h: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Third-order coefficients predicted from eigenvalue gradients of the Hessian.

    Returns (from_eigs, from_tensor): the vectors
    (u+ . grad l+, u- . grad l+, u+ . grad l-, u- . grad l-) and the
    corresponding rotated third derivatives d^3 f / d eta^3. Eigenvalue
    gradients come from fourth-order central differences of the Hessian's
    eigenvalues.
    """
    p = patch.point(center)
    B0 = _derivs_at(p, patch.axis, 2)
    vals, U = ordered_eig(B0)
    grads = np.zeros((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        lam = {m: ordered_eig(_derivs_at(patch.point(np.add(center, m * e)), patch.axis, 2))[0]
               for m in (-2, -1, 1, 2)}
        grads[:, k] = (8 * (lam[1] - lam[-1]) - (lam[2] - lam[-2])) / (12 * h)
    up, um = U[:, 0], U[:, 1]
    from_eigs = np.array([up @ grads[0], um @ grads[0], up @ grads[1], um @ grads[1]])
    T = _derivs_at(p, patch.axis, 3)
    Tr = np.einsum("abc,ai,bj,ck->ijk", T, U, U, U)
    from_tensor = np.array([Tr[0, 0, 0], Tr[0, 0, 1], Tr[0, 1, 1], Tr[1, 1, 1]])
    return from_eigs, from_tensor
