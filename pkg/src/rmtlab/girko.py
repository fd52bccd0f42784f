"""Girko Hermitization for rescaled test functions and a moment-matching comparison.

Test functions live on the microscopic scale: f_z(w) = N f(sqrt(N)(w - z)).
Writing u = sqrt(N)(w - z), the linear statistic and the Hermitized integral
become

    direct   = sum_i f(u_i) - (1/pi) int_{|z + u/sqrt N| < 1} f(u) d^2u
    integral = -(N / 2 pi) int Lap f(u) J(z + u/sqrt N) d^2u

with J(w) = int_{eta_lo}^{eta_hi} <Im G_w(i eta)> - Im m^w(i eta) d eta over the
window [N^{-1-eps}, N^{-1+eps}]. The minus sign comes from
log|det(A - w)| = (1/2) sum log(s_i^2 + T^2) - N int_0^T <Im G_w(i eta)> d eta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack

from .ensembles import EnsembleSpec, MatchedPair, sample_matrix
from .hermitization import BulkPoint, h_traces_fast
from .mde import solve_mz
from .numkernel import DomainError


class RefinementError(RuntimeError):
    """Quadrature refinements disagree beyond tolerance."""


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Bump amplitude * exp(-1/(1 - |u - c|^2 / r^2)) supported in |u - c| < r."""

    __test__ = False  # not a pytest class

    radius: float = 1.5
    amplitude: float = 1.0
    center: complex = 0j

    def f(self, u):
        x = np.abs(np.asarray(u, complex) - self.center) ** 2 / self.radius ** 2
        out = np.zeros(x.shape)
        m = x < 1
        out[m] = self.amplitude * np.exp(-1 / (1 - x[m]))
        return out

    def laplacian(self, u):
        # for g(x), x = |u - c|^2 / r^2: Lap = (4 / r^2)(g' + x g'')
        x = np.abs(np.asarray(u, complex) - self.center) ** 2 / self.radius ** 2
        out = np.zeros(x.shape)
        m = x < 1
        v = x[m]
        g = np.exp(-1 / (1 - v))
        gp = -g / (1 - v) ** 2
        gpp = g * (1 / (1 - v) ** 4 - 2 / (1 - v) ** 3)
        out[m] = self.amplitude * 4 / self.radius ** 2 * (gp + v * gpp)
        return out

    def polar_grid(self, nr: int = 24, nphi: int = 24):
        """Nodes and weights of a polar rule on the support disk."""
        x, w = np.polynomial.legendre.leggauss(nr)
        rho = (x + 1) / 2 * self.radius
        wr = w * self.radius / 2 * rho
        phi = np.arange(nphi) * 2 * np.pi / nphi
        R, P = np.meshgrid(rho, phi, indexing="ij")
        U = self.center + R * np.exp(1j * P)
        W = np.repeat(wr[:, None], nphi, axis=1) * (2 * np.pi / nphi)
        return U.ravel(), W.ravel()

    def laplacian_l1(self, nr: int = 64, nphi: int = 64) -> float:
        U, W = self.polar_grid(nr, nphi)
        return float(np.abs(self.laplacian(U)) @ W)

    def integral(self, nr: int = 64, nphi: int = 64) -> float:
        U, W = self.polar_grid(nr, nphi)
        return float(self.f(U) @ W)

    def fd_check(self, h: float = 2e-4, n: int = 41) -> float:
        """Max deviation of Lap f from the 5-point stencil on a grid over the support."""
        g = np.linspace(-self.radius, self.radius, n)
        X, Y = np.meshgrid(g, g)
        U = self.center + X + 1j * Y
        fd = (self.f(U + h) + self.f(U - h) + self.f(U + 1j * h) + self.f(U - 1j * h)
              - 4 * self.f(U)) / h ** 2
        return float(np.abs(fd - self.laplacian(U)).max())


class ZeroFunction(TestFunction):
    def f(self, u):
        return np.zeros(np.shape(u))

    def laplacian(self, u):
        return np.zeros(np.shape(u))


# ---------------------------------------------------------------------------
# Girko functional
# ---------------------------------------------------------------------------

@dataclass
class GirkoResult:
    direct: float
    integral: float
    epsilon: float
    etaGrid: np.ndarray = field(repr=False)
    laplacianL1: float = 0.0
    diskTerm: float = 0.0
    count: float = 0.0

    @property
    def discrepancy(self) -> float:
        return abs(self.direct - self.integral)

    @property
    def relative(self) -> float:
        return self.discrepancy / self.laplacianL1 if self.laplacianL1 > 0 else 0.0


def eta_rule(N: int, epsilon: float, n: int = 40):
    """Gauss-Legendre nodes in log(eta) on [N^{-1-eps}, N^{-1+eps}] (weights include d eta)."""
    lo, hi = np.log(N ** (-1 - epsilon)), np.log(N ** (-1 + epsilon))
    x, w = np.polynomial.legendre.leggauss(n)
    le = (x + 1) / 2 * (hi - lo) + lo
    etas = np.exp(le)
    return etas, w * (hi - lo) / 2 * etas


@lru_cache(maxsize=64)
def _deterministic_j(N: int, epsilon: float, z: complex, points: tuple, n_eta: int) -> np.ndarray:
    etas, we = eta_rule(N, epsilon, n_eta)
    out = np.empty(len(points))
    for i, u in enumerate(points):
        w = z + u / np.sqrt(N)
        out[i] = sum(wk * solve_mz(w, 1j * e).m.imag for e, wk in zip(etas, we))
    return out


def _logdet_shift(G: np.ndarray, eta: float) -> float:
    """log det(G + eta^2) for Hermitian positive G, via Cholesky."""
    C = G.copy()
    C[np.diag_indices_from(C)] += eta * eta
    potrf = lapack.zpotrf if np.iscomplexobj(C) else lapack.dpotrf
    L, info = potrf(C, lower=1, clean=0, overwrite_a=1)
    if info != 0:
        raise np.linalg.LinAlgError("Cholesky failed")
    return float(2 * np.log(np.abs(np.diagonal(L))).sum())


def empirical_j(A: np.ndarray, w: complex, eta_lo: float, eta_hi: float) -> float:
    """int <Im G_w(i eta)> d eta over [eta_lo, eta_hi], exactly: (1/2N) log-det ratio."""
    N = A.shape[0]
    X = A - w * np.eye(N)
    G = X @ X.conj().T
    return (_logdet_shift(G, eta_hi) - _logdet_shift(G, eta_lo)) / (2 * N)


def girko_functional(X, f: TestFunction, z, epsilon: float, nr: int = 24, nphi: int = 24,
                     n_eta: int = 40, eigvals=None) -> GirkoResult:
    if not 0 < epsilon < 0.5:
        raise DomainError("epsilon must lie in (0, 0.5)")
    X = np.asarray(X)
    N = X.shape[0]
    z = complex(z.z if isinstance(z, BulkPoint) else z)
    ev = np.linalg.eigvals(X) if eigvals is None else np.asarray(eigvals)
    U, W = f.polar_grid(nr, nphi)
    fu = f.f(U)
    in_disk = np.abs(z + U / np.sqrt(N)) < 1
    disk = float((fu * in_disk) @ W) / np.pi
    count = float(f.f(np.sqrt(N) * (ev - z)).sum())
    direct = count - disk
    lap = f.laplacian(U)
    etas, _ = eta_rule(N, epsilon, n_eta)
    l1 = float(np.abs(lap) @ W)
    if l1 == 0:
        return GirkoResult(direct, 0.0, epsilon, etas, 0.0, disk, count)
    active = np.flatnonzero(lap != 0)
    jdet = _deterministic_j(N, float(epsilon), z, tuple(U[active].tolist()), n_eta)
    lo, hi = N ** (-1 - epsilon), N ** (-1 + epsilon)
    jemp = np.array([empirical_j(X, z + U[i] / np.sqrt(N), lo, hi) for i in active])
    if np.any(jemp < 0):
        raise RefinementError("negative Herglotz trace integral")
    integral = -N / (2 * np.pi) * float((lap[active] * W[active]) @ (jemp - jdet))
    return GirkoResult(direct, integral, epsilon, etas, l1, disk, count)


def refinement_change(X, f: TestFunction, z, epsilon: float, nr: int = 24, nphi: int = 24,
                      n_eta: int = 40) -> float:
    """|I(2x nodes) - I| / ||Lap f||_1 for the integral side."""
    r1 = girko_functional(X, f, z, epsilon, nr, nphi, n_eta)
    r2 = girko_functional(X, f, z, epsilon, 2 * nr, 2 * nphi, 2 * n_eta)
    return abs(r2.integral - r1.integral) / r1.laplacianL1


def girko_seed_task(args):
    spec, seed, f, z, epsilon = args
    A = sample_matrix(spec.with_seed(seed))
    r = girko_functional(A, f, z, epsilon)
    return {"seed": seed, "direct": r.direct, "integral": r.integral,
            "discrepancy": r.discrepancy, "laplacianL1": r.laplacianL1}


def girko_experiment(spec: EnsembleSpec, f: TestFunction, z, epsilon: float, seeds,
                     mapper=map) -> dict:
    rows = list(mapper(girko_seed_task, [(spec, int(s), f, z, epsilon) for s in seeds]))
    rel = np.array([r["discrepancy"] / r["laplacianL1"] for r in rows])
    return {"rows": rows, "medianRelative": float(np.median(rel)),
            "laplacianL1": rows[0]["laplacianL1"]}


# ---------------------------------------------------------------------------
# Moment-matching comparison at the resolvent level
# ---------------------------------------------------------------------------

def _im_trace(A: np.ndarray, z: complex, eta: float) -> float:
    """<Im G_z(i eta)> = eta Tr H_z / N."""
    tr_h, _ = h_traces_fast(A, z, eta)
    val = eta * float(np.real(tr_h)) / A.shape[0]
    if val < 0:
        raise RefinementError("negative Herglotz trace")
    return val


def im_m_scaled(z: complex, eta: float, scale: float) -> float:
    """Im m for entries of variance scale^2 / N: m^{z/s}(i eta / s) / s."""
    return solve_mz(z / scale, 1j * eta / scale).m.imag / scale


def _product_stat(A, zs, etas, scale):
    return float(np.prod([_im_trace(A, z, e) - im_m_scaled(z, e, scale) for z, e in zip(zs, etas)]))


def _cmp_task(args):
    pair, seed, zs, etas, scale, self_check = args
    left = _product_stat(pair.sample_left(seed), zs, etas, scale)
    if self_check:
        return left, _product_stat(pair.sample_left(seed), zs, etas, scale)
    return left, _product_stat(pair.sample_right(seed), zs, etas, scale)


def mismatched_pair(pair: MatchedPair, factor: float = 1.5) -> MatchedPair:
    """Same pair with the variance of the A-law multiplied by ``factor``."""
    from dataclasses import replace
    return replace(pair, base=replace(pair.base, variance=pair.base.var * factor))


def comparison_experiment(pair: MatchedPair, f: TestFunction | None, points, k: int,
                          samples: int, etas=None, epsilon: float = 0.3, seed: int = 0,
                          mapper=map, self_check: bool = False) -> dict:
    """Monte-Carlo of E prod_l <Im G_{z_l}(i eta_l) - Im m^{z_l}(i eta_l)> for both laws.

    ``f`` is only echoed in the record; the statistic is at resolvent level.
    Default spectral parameters are eta_l = N^{-1+eps}. ``self_check`` compares
    the left law with itself on the same seeds.
    """
    if k > 3 or k < 1:
        raise DomainError("k must lie in 1..3")
    if samples < 100:
        raise DomainError("samples must be >= 100")
    N = pair.target.N
    zs = [complex(p.z if isinstance(p, BulkPoint) else p) for p in list(points)[:k]]
    if len(zs) < k:
        raise DomainError("need at least k points")
    etas = [N ** (-1 + epsilon)] * k if etas is None else list(etas)[:k]
    scale = float(np.sqrt((1 + pair.t) * pair.target.var * N))
    out = list(mapper(_cmp_task, [(pair, seed + i, zs, etas, scale, self_check) for i in range(samples)]))
    left = np.array([o[0] for o in out])
    right = np.array([o[1] for o in out])
    se = float(np.sqrt(left.var(ddof=1) / samples + right.var(ddof=1) / samples))
    diff = float(left.mean() - right.mean())
    return {"left": float(left.mean()), "right": float(right.mean()), "difference": diff,
            "stderr": se, "zScore": abs(diff) / se if se > 0 else (0.0 if diff == 0 else np.inf),
            "N": N, "k": k, "etas": etas, "points": [[z.real, z.imag] for z in zs],
            "samples": samples, "testFunction": None if f is None else
            {"radius": f.radius, "amplitude": f.amplitude}}
