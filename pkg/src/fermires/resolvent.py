"""Lattice resolvent kernels of H0 = -Laplacian on Z^3 and finite-section norms.

The kernel K_z(x) = int_{T^3} e^{2 pi i x.xi} / (h0(xi) - z) dxi is computed by
one of two independent routes:

* ``"fft"``: trapezoid rule on an N^3 torus grid. Since the symbol is even in
  every coordinate the transform is a type-I DCT on N/2 + 1 points per axis.
  N doubles until K(0) is stable. The result is the periodised kernel, so
  the box radius is kept at most N/4.
* ``"bessel"``: the time representation 1/(h0 - z) = i int_0^inf e^{it(z - h0)} dt
  factorises over axes into Bessel functions,
  K_z(x) = i int_0^inf e^{it(z - 6)} prod_j i^{x_j} J_{x_j}(2t) dt,
  integrated with Gauss-Legendre panels. This stays accurate close to the
  spectrum where the grid integrand is sharply peaked.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy import special

from .errors import NoConvergence, OnSpectrum
from .torus import threshold_distance

SPECTRUM = (0.0, 12.0)


def _check_z(z: complex) -> complex:
    z = complex(z)
    if abs(z.imag) <= 1e-12 and SPECTRUM[0] - 1e-12 <= z.real <= SPECTRUM[1] + 1e-12:
        raise OnSpectrum(f"z = {z} lies on the spectrum [0, 12]")
    return z


def spectral_distance(z: complex) -> float:
    z = complex(z)
    x = min(max(z.real, SPECTRUM[0]), SPECTRUM[1])
    return abs(z - x)


@dataclass(frozen=True)
class ResolventGrid:
    """Kernel values K_z(x) for |x|_inf <= box_radius, stored with offset index x + L."""

    z: complex
    grid_n: int
    box_radius: int
    values: np.ndarray
    method: str = "fft"

    def __call__(self, x) -> complex:
        L = self.box_radius
        i, j, k = (int(v) + L for v in x)
        return complex(self.values[i, j, k])

    @property
    def kernel(self) -> dict:
        L = self.box_radius
        r = range(-L, L + 1)
        return {x: complex(self.values[x[0] + L, x[1] + L, x[2] + L]) for x in itertools.product(r, r, r)}

    def export_lines(self) -> list[str]:
        L = self.box_radius
        out = []
        for x in itertools.product(range(-L, L + 1), repeat=3):
            v = self.values[x[0] + L, x[1] + L, x[2] + L]
            out.append(f"{x[0]} {x[1]} {x[2]} {v.real:.17g} {v.imag:.17g}")
        return out

    def apply_h0_minus_z(self) -> np.ndarray:
        """(H0 - z) K on the interior of the box, via the 7-point stencil."""
        K = self.values
        c = K[1:-1, 1:-1, 1:-1]
        out = (6.0 - self.z) * c
        out = out - K[2:, 1:-1, 1:-1] - K[:-2, 1:-1, 1:-1]
        out = out - K[1:-1, 2:, 1:-1] - K[1:-1, :-2, 1:-1]
        out = out - K[1:-1, 1:-1, 2:] - K[1:-1, 1:-1, :-2]
        return out


def _unfold(octant: np.ndarray, L: int) -> np.ndarray:
    """Values on 0..L per axis -> full box -L..L using evenness in each axis."""
    idx = np.abs(np.arange(-L, L + 1))
    return octant[np.ix_(idx, idx, idx)]


def _fft_octant(z: complex, N: int, L: int) -> np.ndarray:
    m = N // 2
    xi = np.arange(m + 1) / N
    s = 4.0 * np.sin(np.pi * xi) ** 2
    h = s[:, None, None] + s[None, :, None] + s[None, None, :]
    g = 1.0 / (h - z)
    out = sfft.dctn(g.real, type=1) + 1j * sfft.dctn(g.imag, type=1)
    return out[: L + 1, : L + 1, : L + 1] / N**3


def kernel_fft(z: complex, grid_n: int = 64, box_radius: int = 8, rtol: float = 1e-8,
               max_n: int = 512) -> ResolventGrid:
    z = _check_z(z)
    if grid_n < 64 or grid_n & (grid_n - 1):
        raise ValueError("grid_n must be a power of two >= 64")
    N = max(grid_n, 4 * box_radius)
    N = 1 << (N - 1).bit_length()
    prev = _fft_octant(z, N, box_radius)
    while True:
        if 2 * N > max_n:
            raise NoConvergence(f"kernel at z = {z} not converged by grid_n = {N}")
        cur = _fft_octant(z, 2 * N, box_radius)
        N *= 2
        if abs(cur[0, 0, 0] - prev[0, 0, 0]) < rtol * abs(cur[0, 0, 0]):
            return ResolventGrid(z, N, box_radius, _unfold(cur, box_radius), "fft")
        prev = cur


def _gl_panels(T: float, width: float = 0.5, order: int = 10) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    n = max(1, math.ceil(T / width))
    a = np.arange(n) * width
    t = (a[:, None] + 0.5 * width * (x[None, :] + 1.0)).ravel()
    return t, np.tile(0.5 * width * w, n)


def _octant_from_bessel(L: int, tw: np.ndarray, J: np.ndarray) -> np.ndarray:
    """sum_t tw(t) J[a](t) J[b](t) J[c](t) for 0 <= c <= b <= a <= L, symmetrised."""
    out = np.zeros((L + 1,) * 3, dtype=complex)
    for a in range(L + 1):
        wa = tw * J[a]
        for b in range(a + 1):
            v = J[: b + 1] @ (wa * J[b])
            for c in range(b + 1):
                for perm in set(itertools.permutations((a, b, c))):
                    out[perm] = v[c]
    return out


def kernel_bessel(z: complex, box_radius: int = 8, tol: float = 1e-14) -> ResolventGrid:
    z = _check_z(z)
    L = box_radius
    orders = np.arange(L + 1)
    if z.imag < 0:
        g = kernel_bessel(z.conjugate(), box_radius, tol)
        return ResolventGrid(z, 0, L, g.values.conj(), "bessel")
    if abs(z.imag) <= 1e-12 and z.real < 0:
        T = -math.log(tol) / -z.real
        t, w = _gl_panels(T)
        J = special.ive(orders[:, None], 2.0 * t[None, :])
        tw = w * np.exp(t * z.real)
        oct_ = _octant_from_bessel(L, tw, J).real.astype(complex)
    elif abs(z.imag) <= 1e-12 and z.real > 12:
        T = -math.log(tol) / (z.real - 12.0)
        t, w = _gl_panels(T)
        J = special.ive(orders[:, None], 2.0 * t[None, :])
        tw = w * np.exp(-t * (z.real - 12.0))
        oct_ = -_octant_from_bessel(L, tw, J).real.astype(complex)
        sign = (-1.0) ** (orders[:, None, None] + orders[None, :, None] + orders[None, None, :])
        oct_ = oct_ * sign
    else:
        T = -math.log(tol) / z.imag
        t, w = _gl_panels(T)
        J = special.jv(orders[:, None], 2.0 * t[None, :])
        tw = 1j * w * np.exp(1j * t * (z - 6.0))
        oct_ = _octant_from_bessel(L, tw, J)
        phase = 1j ** (orders[:, None, None] + orders[None, :, None] + orders[None, None, :])
        oct_ = oct_ * phase
    return ResolventGrid(z, 0, L, _unfold(oct_, L), "bessel")


def kernel(z: complex, grid_n: int = 64, box_radius: int = 8, method: str = "auto") -> ResolventGrid:
    """Tabulate R0(z)(x, 0) for |x|_inf <= box_radius.

    ``method="auto"`` uses the grid transform when z is at distance >= 1 from
    [0, 12] and the Bessel representation otherwise.
    """
    z = _check_z(z)
    if method == "auto":
        method = "fft" if spectral_distance(z) >= 1.0 else "bessel"
    if method == "fft":
        return kernel_fft(z, grid_n, box_radius)
    if method == "bessel":
        return kernel_bessel(z, box_radius)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# finite sections


class SectionOperator:
    """Matrix-free Toeplitz operator [K(x - y)] on the cube |x|_inf <= r."""

    def __init__(self, grid: ResolventGrid, section_radius: int):
        r = section_radius
        if 2 * r > grid.box_radius:
            raise ValueError("section_radius must be at most box_radius / 2")
        L = grid.box_radius
        self.r, self.n = r, 2 * r + 1
        K = grid.values[L - 2 * r: L + 2 * r + 1, L - 2 * r: L + 2 * r + 1, L - 2 * r: L + 2 * r + 1]
        self.K = K
        self.shape3 = (self.n,) * 3
        self.size = self.n**3
        self.fshape = [sfft.next_fast_len(4 * r + 1 + self.n - 1)] * 3
        self.Khat = sfft.fftn(K, self.fshape)
        self.Khat_conj = sfft.fftn(K.conj(), self.fshape)

    def _conv(self, Khat, v):
        v3 = v.reshape(self.shape3)
        full = sfft.ifftn(Khat * sfft.fftn(v3, self.fshape))
        s = slice(self.n - 1, 2 * self.n - 1)
        return full[s, s, s].reshape(-1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self._conv(self.Khat, np.asarray(v, complex))

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        # K(x - y) is even in x - y, so the adjoint kernel is conj(K)
        return self._conv(self.Khat_conj, np.asarray(v, complex))

    def dense(self) -> np.ndarray:
        pts = np.array(list(itertools.product(range(self.n), repeat=3)))
        d = pts[:, None, :] - pts[None, :, :] + 2 * self.r
        return self.K[d[..., 0], d[..., 1], d[..., 2]]


@dataclass(frozen=True)
class NormEstimate:
    value: float
    converged: bool
    iterations: int

    def __float__(self):
        return self.value


def _dual(v: np.ndarray, q: float) -> np.ndarray:
    """Unit vector of l^{q'} norming v in l^q: |v|^{q-1} sgn(v) / |v|_q^{q-1}."""
    a = np.abs(v)
    nrm = np.linalg.norm(a, q)
    if nrm == 0:
        return np.zeros_like(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        sgn = np.where(a > 0, v / np.where(a > 0, a, 1.0), 0.0)
    return sgn * (a / nrm) ** (q - 1.0)


def boyd_norm(matvec, rmatvec, x0: np.ndarray, p: float, q: float, tol: float = 1e-8,
              max_iter: int = 1000) -> tuple[float, np.ndarray, bool, int]:
    """Nonlinear power iteration for |A|_{p -> q} (p <= q) from the start ``x0``."""
    pd = p / (p - 1.0)
    x = x0 / np.linalg.norm(x0, p)
    est = 0.0
    for it in range(1, max_iter + 1):
        y = matvec(x)
        new = float(np.linalg.norm(y, q))
        w = rmatvec(_dual(y, q))
        x = _dual(w, pd)
        if it > 1 and abs(new - est) <= tol * max(new, 1e-300):
            return new, x, True, it
        est = new
    return est, x, False, max_iter


def pp_dual_norm(matvec, rmatvec, size: int, p: float, restarts: int = 5, seed: int = 0,
                 tol: float = 1e-8, max_iter: int = 1000, starts=None) -> NormEstimate:
    """Lower bound on |A|_{p -> p'} from Boyd's iteration with several starts."""
    if not 1.0 < p < 2.0 + 1e-15:
        raise ValueError("p must lie in (1, 2]")
    q = p / (p - 1.0) if p < 2 else 2.0
    rng = np.random.default_rng(seed)
    starts = list(starts) if starts is not None else []
    e0 = np.zeros(size, complex)
    e0[size // 2] = 1.0
    starts += [e0] + [rng.standard_normal(size) + 1j * rng.standard_normal(size)
                      for _ in range(max(restarts - 1, 0))]
    best, conv_all, iters = 0.0, True, 0
    for x0 in starts:
        val, _, conv, it = boyd_norm(matvec, rmatvec, np.asarray(x0, complex), p, q, tol, max_iter)
        iters += it
        if val > best:
            best = val
        conv_all &= conv
    return NormEstimate(best, conv_all, iters)


def finite_section_norm(grid: ResolventGrid, p: float, section_radius: int, restarts: int = 5,
                        seed: int = 0, tol: float = 1e-8, max_iter: int = 1000) -> NormEstimate:
    """Norm of the finite section [K(x - y)] from l^p to l^{p'} (a lower bound for 1 < p < 2).

    p = 1 uses the exact value max |K|; p = 2 the largest singular value.
    """
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    op = SectionOperator(grid, section_radius)
    if p == 1.0:
        return NormEstimate(float(np.max(np.abs(op.K))), True, 0)
    if p == 2.0:
        from scipy.sparse.linalg import LinearOperator, svds

        A = LinearOperator((op.size, op.size), matvec=op.matvec, rmatvec=op.rmatvec, dtype=complex)
        if op.size <= 400:
            s = np.linalg.norm(op.dense(), 2)
            return NormEstimate(float(s), True, 0)
        v0 = np.ones(op.size) / math.sqrt(op.size)
        s = svds(A, k=1, tol=1e-12, return_singular_vectors=False, v0=v0, random_state=seed)
        return NormEstimate(float(s[0]), True, 0)
    return pp_dual_norm(op.matvec, op.rmatvec, op.size, p, restarts, seed, tol, max_iter)


@dataclass(frozen=True)
class WeightSpec:
    support: list
    values: np.ndarray
    r: float

    def __post_init__(self):
        if np.any(np.asarray(self.values) <= 0):
            raise ValueError("weights must be positive on their support")

    @property
    def r_norm(self) -> float:
        return float(np.linalg.norm(np.asarray(self.values, float), self.r))

    def normalized(self) -> "WeightSpec":
        return WeightSpec(self.support, np.asarray(self.values) / self.r_norm, self.r)


def random_weight(section_radius: int, r: float, rng, density: float = 0.3) -> WeightSpec:
    pts = list(itertools.product(range(-section_radius, section_radius + 1), repeat=3))
    keep = [p for p in pts if rng.random() < density] or [pts[len(pts) // 2]]
    vals = rng.random(len(keep)) + 0.05
    return WeightSpec(keep, vals, r).normalized()


def weighted_bs_norm(grid: ResolventGrid, W1: WeightSpec, W2: WeightSpec) -> float:
    """Largest singular value of [W1(x) K(x - y) W2(y)] over the weight supports."""
    L = grid.box_radius
    P1, P2 = np.array(W1.support), np.array(W2.support)
    d = P1[:, None, :] - P2[None, :, :]
    if np.max(np.abs(d)) > L:
        raise ValueError("weight supports reach beyond the tabulated box")
    M = grid.values[d[..., 0] + L, d[..., 1] + L, d[..., 2] + L]
    M = np.asarray(W1.values)[:, None] * M * np.asarray(W2.values)[None, :]
    return float(np.linalg.norm(M, 2))


# ---------------------------------------------------------------------------
# scans


@dataclass
class NormScanReport:
    p: float
    r: float
    z_samples: list
    norms: list
    weighted: list
    max_norm: float
    near_threshold_slope: float | None
    slopes_by_threshold: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)


def holder_r(p: float) -> float:
    """r with 1/p = 1/2 + 1/r (infinite at p = 2)."""
    inv = 1.0 / p - 0.5
    return math.inf if inv <= 0 else 1.0 / inv


def threshold_scan(p: float, r: float | None, eps_list, seeds: int = 2, section_radius: int = 4,
                   thresholds=(0, 1, 2, 3), restarts: int = 5) -> NormScanReport:
    """Section norms at z = 4k +- eps + i eps / 10 for each threshold 4k.

    The slope is fitted to log(max norm at each eps) against log eps; a value
    near zero means the norms stay bounded as z approaches the thresholds.
    """
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing")
    r = holder_r(p) if r is None else r
    z_samples, norms, weighted, flags = [], [], [], []
    per_eps = {e: 0.0 for e in eps_list}
    per_k: dict = {k: {e: 0.0 for e in eps_list} for k in thresholds}
    rng = np.random.default_rng(12345)
    for k in thresholds:
        for sgn in (-1.0, 1.0):
            for e in eps_list:
                z = complex(4 * k + sgn * e, e / 10.0)
                g = kernel(z, box_radius=2 * section_radius, method="bessel")
                est = finite_section_norm(g, p, section_radius, restarts=restarts)
                wv = 0.0
                if math.isfinite(r):
                    for _ in range(seeds):
                        W1 = random_weight(section_radius, r, rng)
                        W2 = random_weight(section_radius, r, rng)
                        wv = max(wv, weighted_bs_norm(g, W1, W2))
                z_samples.append(z)
                norms.append(est.value)
                weighted.append(wv)
                flags.append("" if est.converged else "not-converged")
                per_eps[e] = max(per_eps[e], est.value)
                per_k[k][e] = max(per_k[k][e], est.value)

    def slope(d):
        if len(eps_list) < 2:
            return None
        return float(np.polyfit(np.log(eps_list), np.log([d[e] for e in eps_list]), 1)[0])

    return NormScanReport(p, r, z_samples, norms, weighted, max(norms), slope(per_eps),
                          {4 * k: slope(per_k[k]) for k in thresholds}, flags)


def uniformity_grid() -> list[complex]:
    """Twenty points of D_{1/2} spread over the spectral band and both half-planes' edge."""
    re = (-1.0, 1.0, 2.0, 3.0, 5.0, 6.0, 7.0, 9.0, 10.0, 11.0)
    zs = [complex(x, y) for x in re for y in (0.5, 1.0)]
    assert all(threshold_distance(z) >= 0.5 for z in zs)
    return zs


def uniformity_scan(p: float = 1.25, radii=(8, 16), zs=None, restarts: int = 5) -> dict:
    """Section norms at each z and section radius; returns the relative growth."""
    zs = uniformity_grid() if zs is None else zs
    table = {}
    for z in zs:
        g = kernel(z, box_radius=2 * max(radii))
        table[z] = [finite_section_norm(g, p, R, restarts=restarts).value for R in radii]
    growth = {z: v[-1] / v[0] - 1.0 for z, v in table.items()}
    maxes = [max(v[i] for v in table.values()) for i in range(len(radii))]
    return {"table": table, "growth": growth, "max_by_radius": maxes}


# ---------------------------------------------------------------------------
# weighted / unweighted constants for a fixed finite matrix


def _direct_constant(A: np.ndarray, p: float, restarts: int, seed: int) -> float:
    if p == 1.0:
        return float(np.max(np.abs(A)))
    if p == 2.0:
        return float(np.linalg.norm(A, 2))
    n = A.shape[1]
    rng = np.random.default_rng(seed)
    starts = [np.eye(n)[j] for j in range(n)]
    if n <= 10:
        starts += [np.array((1.0,) + s) for s in itertools.product((1.0, -1.0), repeat=n - 1)]
    starts += [rng.standard_normal(n) for _ in range(restarts)]
    if np.iscomplexobj(A):
        starts += [rng.standard_normal(n) + 1j * rng.standard_normal(n) for _ in range(restarts)]
    est = pp_dual_norm(lambda v: A @ v, lambda v: A.conj().T @ v, n, p, restarts=1, seed=seed,
                       tol=1e-13, max_iter=5000, starts=starts)
    return est.value


def _weighted_objective(theta, A, r, m):
    w1, w2 = np.exp(theta[:m]), np.exp(theta[m:])
    M = w1[:, None] * A * w2[None, :]
    U, s, Vh = np.linalg.svd(M)
    u, v = U[:, 0], Vh[0].conj()
    sig = s[0]
    g1 = np.real(u.conj() * (A @ (w2 * v))) * w1 / sig
    g2 = np.real((A.T @ (w1 * u.conj())) * v) * w2 / sig
    n1, n2 = np.linalg.norm(w1, r), np.linalg.norm(w2, r)
    val = math.log(sig) - math.log(n1) - math.log(n2)
    g1 -= w1**r / n1**r
    g2 -= w2**r / n2**r
    return -val, -np.concatenate([g1, g2])


def _weighted_constant(A: np.ndarray, p: float, trials: int, seed: int) -> float:
    from scipy.optimize import minimize

    r = holder_r(p)
    m, n = A.shape
    if not math.isfinite(r):
        # the l^inf ball: the singular value is monotone in each weight
        rng = np.random.default_rng(seed)
        best = float(np.linalg.norm(A, 2))
        for _ in range(trials):
            w1, w2 = rng.random(m), rng.random(n)
            best = max(best, float(np.linalg.norm(w1[:, None] * A * w2[None, :], 2))
                       / (w1.max() * w2.max()))
        return best
    rng = np.random.default_rng(seed)
    starts = [np.zeros(m + n)]
    # weights peaked on the row and column of a large entry; the p = 1 optimum is of this kind
    for flat in np.argsort(-np.abs(A), axis=None)[: min(A.size, 8)]:
        i, j = np.unravel_index(flat, A.shape)
        th = np.full(m + n, -3.0)
        th[i], th[m + j] = 0.0, 0.0
        starts.append(th)
    starts += [rng.normal(0.0, 1.5, m + n) for _ in range(trials)]
    best = 0.0
    for theta0 in starts:
        res = minimize(_weighted_objective, theta0, args=(A, r, m), jac=True, method="L-BFGS-B",
                       bounds=[(-40.0, 40.0)] * (m + n), options={"maxiter": 2000, "gtol": 1e-12})
        best = max(best, math.exp(-res.fun))
    return best


def holder_equivalence_test(A, p: float, trials: int = 20, seed: int = 0) -> tuple[float, float]:
    """(|A|_{p -> p'}, sup |W1 A W2|_{2 -> 2} / (|W1|_r |W2|_r)) with 1/p = 1/2 + 1/r.

    The two constants coincide for every matrix; each side is computed by its
    own optimisation.
    """
    A = np.asarray(A)
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    if max(A.shape) > 32:
        raise ValueError("matrix too large for the brute-force comparison")
    return _direct_constant(A, p, 4 * trials, seed), _weighted_constant(A, p, trials, seed + 1)
