"""The lattice symbol h0(xi) = 4 sum sin^2(pi xi_j) on the three-torus.

Points carry the trigonometric values a_j = cos 2 pi xi_j, b_j = sin 2 pi xi_j
and c_j = tan 2 pi xi_j, evaluated once when the point is built. Coordinates
that are multiples of 1/4 get exact trigonometric values so that symmetric
points (critical points, umbilics) produce exact zeros downstream.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
C_ABSENT_TOL = 1e-12

# exact (cos, sin) of 2 pi k / 4
_QUARTER_TRIG = {0: (1.0, 0.0), 1: (0.0, 1.0), 2: (-1.0, 0.0), 3: (0.0, -1.0)}


def _wrap(x: float) -> float:
    x = math.fmod(float(x), 1.0)
    if x < 0.0:
        x += 1.0
    if x >= 1.0:
        x = 0.0
    return x


def _trig(xi: float) -> tuple[float, float]:
    q = 4.0 * xi
    if q == math.floor(q):
        return _QUARTER_TRIG[int(q) % 4]
    return math.cos(TWO_PI * xi), math.sin(TWO_PI * xi)


@dataclass(frozen=True)
class TorusPoint:
    """A point of T^3 = R^3/Z^3 with cached trigonometric data.

    Build with :meth:`TorusPoint.at`; coordinates are reduced into [0, 1).
    ``c[j]`` is ``None`` where ``|a[j]| < 1e-12``.
    """

    xi: tuple[float, float, float]
    a: tuple[float, float, float] = field(repr=False)
    b: tuple[float, float, float] = field(repr=False)
    c: tuple[float | None, float | None, float | None] = field(repr=False)

    @classmethod
    def at(cls, xi: Sequence[float]) -> "TorusPoint":
        if len(xi) != 3:
            raise ValueError("a torus point needs three coordinates")
        x = tuple(_wrap(v) for v in xi)
        trig = [_trig(v) for v in x]
        a = tuple(t[0] for t in trig)
        b = tuple(t[1] for t in trig)
        c = tuple(bj / aj if abs(aj) >= C_ABSENT_TOL else None for aj, bj in zip(a, b))
        return cls(x, a, b, c)

    @property
    def a_vec(self) -> np.ndarray:
        return np.array(self.a)

    @property
    def b_vec(self) -> np.ndarray:
        return np.array(self.b)

    @property
    def xi_vec(self) -> np.ndarray:
        return np.array(self.xi)

    def reflect(self, axis: int) -> "TorusPoint":
        """Image under xi_axis -> -xi_axis."""
        x = list(self.xi)
        x[axis] = -x[axis]
        return TorusPoint.at(x)


@dataclass(frozen=True)
class EnergyLevel:
    """Spectral energy lambda with E = 3 - lambda/2 (so M_lambda is sum a_j = E)."""

    lam: float
    E: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.lam <= 12.0:
            raise ValueError(f"energy {self.lam} outside [0, 12]")
        object.__setattr__(self, "E", 3.0 - self.lam / 2.0)

    @property
    def in_degenerate_band(self) -> bool:
        """True for lambda in (4, 8), equivalently E in (-1, 1)."""
        return -1.0 < self.E < 1.0


class ThresholdKind(enum.Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class ThresholdPoint:
    point: TorusPoint
    energy: float
    kind: ThresholdKind


def h0(p: TorusPoint) -> float:
    """Symbol value 4 sum sin^2(pi xi_j), computed as 2 sum (1 - a_j)."""
    return 2.0 * ((1.0 - p.a[0]) + (1.0 - p.a[1]) + (1.0 - p.a[2]))


def grad_h0(p: TorusPoint) -> np.ndarray:
    return 2.0 * TWO_PI * p.b_vec


def h0_array(xi: np.ndarray) -> np.ndarray:
    """Vectorised symbol on an array whose last axis holds the three coordinates."""
    return 2.0 * np.sum(1.0 - np.cos(TWO_PI * np.asarray(xi)), axis=-1)


def critical_points() -> list[ThresholdPoint]:
    """The eight points with every coordinate in {0, 1/2}."""
    out = []
    for halves in itertools.product((0.0, 0.5), repeat=3):
        p = TorusPoint.at(halves)
        e = h0(p)
        kind = ThresholdKind.ELLIPTIC if e in (0.0, 12.0) else ThresholdKind.HYPERBOLIC
        out.append(ThresholdPoint(p, e, kind))
    return out


def threshold_distance(z: complex) -> float:
    """min_k |z - 4k| over the four threshold energies 0, 4, 8, 12."""
    return min(abs(complex(z) - 4.0 * k) for k in range(4))


def torus_distance(x: Sequence[float], y: Sequence[float]) -> float:
    d = np.abs(np.asarray(x, float) - np.asarray(y, float)) % 1.0
    return float(np.linalg.norm(np.minimum(d, 1.0 - d)))
