"""Fourier transforms of cut-off surface measures on M_lambda and their decay.

The integral over the chart,

    I(x) = int chi(xi') exp(2 pi i (x_free . xi' + x_axis f(xi'))) dxi' / |grad h0|,

has a smooth compactly supported integrand, so the trapezoid rule on a uniform
grid converges faster than any power of the step once the oscillation is
resolved. The step is picked from a bound on the phase gradient over the
support, and the error is estimated by comparing with the nested grid of twice
the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from .errors import BudgetExceeded, OutsidePatch
from .geometry import FermiPatch, _derivs_at, curvature_closed_form
from .torus import TWO_PI

FLOOR = 1e-12
REL_TOL = 1e-3
DEFAULT_MAX_NODES = 2.5e8


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth bump exp(1 - 1/(1 - |xi' - center|^2 / radius^2)) in chart coordinates."""

    center: tuple[float, float]
    radius: float
    profile: str = "smooth-bump"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("cutoff radius must be positive")

    def __call__(self, xi_free) -> np.ndarray:
        d = np.asarray(xi_free, float) - np.asarray(self.center)
        r2 = np.sum(d * d, axis=-1) / self.radius**2
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(r2 < 1.0, np.exp(1.0 - 1.0 / (1.0 - np.minimum(r2, 1.0 - 1e-300))), 0.0)


@dataclass(frozen=True)
class OscSample:
    x: np.ndarray
    value: complex
    quad_error: float
    nodes: int = 0

    @property
    def reliable(self) -> bool:
        return self.quad_error < REL_TOL * max(abs(self.value), FLOOR)


@numba.njit(cache=True)
def _trapezoid_pair(cos1, sin1, cos2, sin2, n, step, rho, E, branch, f0, k1, k2, ks):
    """Trapezoid sums at ``step`` and at ``2 * step`` on nodes i, j in [-n, n]."""
    fine = 0.0 + 0.0j
    coarse = 0.0 + 0.0j
    inv_rho2 = 1.0 / (rho * rho)
    two_pi = 2.0 * math.pi
    for i in range(-n, n + 1):
        di = i * step
        a1 = cos1[i + n]
        s1 = sin1[i + n]
        row = 0.0 + 0.0j
        row_c = 0.0 + 0.0j
        for j in range(-n, n + 1):
            dj = j * step
            r2 = (di * di + dj * dj) * inv_rho2
            if r2 >= 1.0:
                continue
            a_s = E - a1 - cos2[j + n]
            if a_s <= -1.0 or a_s >= 1.0:
                continue
            chi = math.exp(1.0 - 1.0 / (1.0 - r2))
            theta = math.acos(a_s) / two_pi
            if branch > 0:
                df = theta - f0
            else:
                df = (1.0 - theta) - f0
            df -= math.floor(df + 0.5)
            b_s2 = 1.0 - a_s * a_s
            grad = 2.0 * two_pi * math.sqrt(s1 * s1 + sin2[j + n] * sin2[j + n] + b_s2)
            ph = k1 * di + k2 * dj + ks * df
            w = chi / grad
            z = complex(w * math.cos(ph), w * math.sin(ph))
            row += z
            if (i % 2 == 0) and (j % 2 == 0):
                row_c += z
        fine += row
        coarse += row_c
    return fine * step * step, coarse * 4.0 * step * step


class SurfaceIntegral:
    """Evaluator of I(x) for one patch and cutoff.

    A coarse table of the chart gradient bounds the phase gradient, which sets
    the grid level for each x.
    """

    def __init__(self, patch: FermiPatch, cutoff: CutoffSpec, max_nodes: float = DEFAULT_MAX_NODES,
                 min_level: int = 6):
        c = np.asarray(cutoff.center, float)
        if np.linalg.norm(patch.offset(c)) + cutoff.radius > patch.radius * (1 + 1e-12):
            raise OutsidePatch("cutoff support leaves the chart")
        self.patch, self.cutoff = patch, cutoff
        self.max_nodes, self.min_level = max_nodes, min_level
        self.center_point = patch.point(c)
        self.f0 = self.center_point.xi[patch.axis]
        t = np.linspace(-1.0, 1.0, 65)
        g1, g2 = np.meshgrid(t, t, indexing="ij")
        keep = g1**2 + g2**2 <= 1.0
        pts = c + cutoff.radius * np.stack([g1[keep], g2[keep]], axis=1)
        self._grads = np.array([_derivs_at(patch.point(q), patch.axis, 1) for q in pts])
        hess = [np.linalg.norm(_derivs_at(patch.point(q), patch.axis, 2), 2) for q in pts[::7]]
        # slack for the gradient between table nodes
        self._grad_slack = max(hess) * cutoff.radius / 32.0

    def split(self, x) -> tuple[np.ndarray, float]:
        x = np.asarray(x, float)
        return x[list(self.patch.free)], float(x[self.patch.axis])

    def phase_gradient_bound(self, x) -> float:
        xf, xs = self.split(x)
        v = xf[None, :] + xs * self._grads
        return TWO_PI * (float(np.max(np.linalg.norm(v, axis=1))) + abs(xs) * self._grad_slack)

    def _level(self, x) -> int:
        G = self.phase_gradient_bound(x)
        # four fine nodes per local period, so the nested coarse grid still has two
        q = math.ceil(math.log2(max(2.0 * self.cutoff.radius * G / math.pi, 1.0)))
        return max(q, self.min_level)

    def evaluate_at_level(self, x, q: int) -> tuple[complex, complex]:
        rho = self.cutoff.radius
        n = 2**q
        step = rho / n
        c = self.cutoff.center
        k = np.arange(-n, n + 1) * step
        cos1, sin1 = np.cos(TWO_PI * (c[0] + k)), np.sin(TWO_PI * (c[0] + k))
        cos2, sin2 = np.cos(TWO_PI * (c[1] + k)), np.sin(TWO_PI * (c[1] + k))
        xf, xs = self.split(x)
        fine, coarse = _trapezoid_pair(cos1, sin1, cos2, sin2, n, step, rho, self.patch.energy.E,
                                       self.patch.branch, self.f0,
                                       TWO_PI * xf[0], TWO_PI * xf[1], TWO_PI * xs)
        carrier = np.exp(1j * TWO_PI * (xf @ np.asarray(c) + xs * self.f0))
        return complex(fine * carrier), complex(coarse * carrier)

    def __call__(self, x) -> OscSample:
        x = np.asarray(x, float)
        q = self._level(x)
        while True:
            nodes = (2 * 2**q + 1) ** 2
            if nodes > self.max_nodes:
                raise BudgetExceeded(f"{nodes:.3g} nodes needed at |x| = {np.linalg.norm(x):.4g}")
            fine, coarse = self.evaluate_at_level(x, q)
            s = OscSample(x, fine, abs(fine - coarse), nodes)
            if s.reliable or (abs(fine) < FLOOR and s.quad_error < FLOOR):
                return s
            q += 1


def surface_measure_ft(patch: FermiPatch, cutoff: CutoffSpec, x, max_nodes: float = DEFAULT_MAX_NODES) -> OscSample:
    """Fourier transform of chi d sigma at the frequency ``x`` (original axes)."""
    return SurfaceIntegral(patch, cutoff, max_nodes)(x)


# ---------------------------------------------------------------------------
# decay scans


def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


@dataclass(frozen=True)
class DecayFit:
    direction: np.ndarray
    radii: list
    values: list
    errors: list
    fitted_exponent: float
    fit_residual: float
    tainted: bool
    predicted: Fraction | None = None
    is_normal: bool = False


@dataclass
class DecayScan:
    fits: list
    min_exponent: float
    argmin: int
    tainted_fits: int = 0
    predicted: Fraction | None = None
    notes: list = field(default_factory=list)

    @property
    def normal_fit(self) -> DecayFit:
        return next(f for f in self.fits if f.is_normal)


def fit_exponent(radii, values, drop: int = 2, floor: float = FLOOR) -> tuple[float, float]:
    """Slope of -log|I| against log R, and the max deviation from the line."""
    R = np.asarray(radii, float)[drop:]
    v = np.abs(np.asarray(values, complex))[drop:]
    ok = v >= floor
    if ok.sum() < 2:
        return math.inf, 0.0
    X, Y = np.log(R[ok]), -np.log(v[ok])
    slope, icpt = np.polyfit(X, Y, 1)
    return float(slope), float(np.max(np.abs(Y - (slope * X + icpt))))


def decay_scan(
    patch: FermiPatch,
    cutoff: CutoffSpec,
    directions: int = 64,
    R_min: float = 16.0,
    R_max: float = 4096.0,
    predicted: Fraction | None = None,
    max_nodes: float = DEFAULT_MAX_NODES,
    progress=None,
) -> DecayScan:
    """Fit decay exponents of |I(R omega)| over dyadic R for many directions.

    Directions are a Fibonacci sphere plus the exact normal at the cutoff
    center (listed last). Over-budget samples become NaN and taint their fit.
    The reported minimum ignores tainted fits.
    """
    if R_min < 16 or R_max / R_min < 2**6:
        raise ValueError("need R_min >= 16 and R_max / R_min >= 64")
    integ = SurfaceIntegral(patch, cutoff, max_nodes)
    _, nu = curvature_closed_form(integ.center_point)
    dirs = list(fibonacci_sphere(directions)) + [nu]
    radii = [float(R) for R in 2.0 ** np.arange(round(math.log2(R_min)), round(math.log2(R_max)) + 1)]
    fits = []
    for k, w in enumerate(dirs):
        vals, errs, bad = [], [], False
        for R in radii:
            try:
                s = integ(R * w)
                vals.append(s.value)
                errs.append(s.quad_error)
                bad |= not (s.reliable or abs(s.value) < FLOOR)
            except BudgetExceeded:
                vals.append(complex("nan"))
                errs.append(math.inf)
                bad = True
        fv = np.nan_to_num(np.array(vals), nan=0.0)
        expo, resid = fit_exponent(radii, fv)
        fits.append(DecayFit(np.asarray(w), radii, vals, errs, expo, resid, bad, predicted,
                             k == len(dirs) - 1))
        if progress is not None:
            progress(k, fits[-1])
    clean = [i for i, f in enumerate(fits) if not f.tainted]
    pool = clean or list(range(len(fits)))
    i_min = min(pool, key=lambda i: fits[i].fitted_exponent)
    return DecayScan(fits, fits[i_min].fitted_exponent, i_min, len(fits) - len(clean), predicted)


def weight_admissible_range(k) -> tuple[Fraction, Fraction]:
    """(r_max, p_max) with r_max = 2 + 2k and 1/p_max = 1/2 + 1/r_max."""
    k = Fraction(k)
    if not 0 < k <= 1:
        raise ValueError("k must lie in (0, 1]")
    r = 2 + 2 * k
    return r, 1 / (Fraction(1, 2) + 1 / r)
