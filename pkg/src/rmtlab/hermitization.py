"""Hermitized resolvents, the self-consistent eta_{z,t}, and trace constants.

Conventions
-----------
For an N x N matrix A and complex z, ``X = A - z`` and the Hermitization is
``[[0, X], [X^*, 0]]``. Its resolvent at ``i*eta`` has blocks::

    G = [[i eta H,  H X], [X^* H,  i eta Ht]]
    H  = (X X^* + eta^2)^{-1},   Ht = (X^* X + eta^2)^{-1}.

``<Y>`` is the trace of Y divided by the dimension of Y. Block traces are
stored block-normalized: ``blockTraces[a, b] = Tr(G_ab) / N``.

For shift parameters (a, b, theta) the 2N x 2N real matrix is
``A_L = kron(I_2, A) - kron(L, I_N)`` with L = [[a, b tan], [-b/tan, a]];
the 2 x 2 index is the outer Kronecker factor everywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import blas, lapack
from scipy.optimize import brentq

from .numkernel import DomainError

DEFAULT_KAPPA = 0.1
DEFAULT_C = 10.0

# Block rotation relating the shift-parameter resolvent at theta = pi/4 to
# diag(G_w, G_wbar); acts on the four N-blocks.
ROT4 = np.array([[1, -1j, 0, 0],
                 [0, 0, 1, -1j],
                 [1, 1j, 0, 0],
                 [0, 0, 1, 1j]]) / np.sqrt(2)


class SolverError(RuntimeError):
    pass


class DegenerateShiftError(DomainError):
    pass


@dataclass(frozen=True)
class BulkPoint:
    a: float
    b: float
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if abs(complex(self.a, self.b)) >= 1:
            raise DomainError(f"bulk point must satisfy |z| < 1, got {complex(self.a, self.b)}")
        if self.b < self.kappa:
            raise DomainError(f"Im z = {self.b} is below the bulk margin {self.kappa}")

    @property
    def z(self) -> complex:
        return complex(self.a, self.b)


@dataclass(frozen=True)
class ShiftParams:
    a: float
    b: float
    theta: float
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if self.b <= 0:
            raise DomainError("b must be positive")
        if not (0 < self.theta < np.pi / 2):
            raise DegenerateShiftError("theta must lie strictly inside (0, pi/2)")
        if min(self.theta, np.pi / 2 - self.theta) < self.kappa:
            raise DegenerateShiftError(
                f"theta = {self.theta} is within {self.kappa} of a degenerate axis")

    @property
    def w(self) -> complex:
        return complex(self.a, self.b)

    @property
    def is_quarter(self) -> bool:
        return abs(self.theta - np.pi / 4) < 1e-15

    def lam(self) -> np.ndarray:
        return lambda_matrix(self.a, self.b, self.theta)


def lambda_matrix(a: float, b: float, theta: float) -> np.ndarray:
    if np.isclose(np.sin(2 * theta), 0.0):
        raise DegenerateShiftError("theta at 0 or pi/2")
    t = np.tan(theta)
    return np.array([[a, b * t], [-b / t, a]])


def shifted_matrix(A, p: ShiftParams) -> np.ndarray:
    A = np.asarray(A)
    N = A.shape[0]
    return np.kron(np.eye(2), A) - np.kron(p.lam(), np.eye(N))


def _z(z) -> complex:
    return z.z if isinstance(z, BulkPoint) else complex(z)


def _check_eta(eta):
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")


# ---------------------------------------------------------------------------
# One-resolvent blocks for the 2N Hermitization
# ---------------------------------------------------------------------------

@dataclass
class ResolventBundle:
    eta: float
    blockTraces: np.ndarray  # block-normalized traces, 2x2 or 4x4
    hTrace: float
    z: complex | None = None
    params: ShiftParams | None = None
    twoBlockTraces: dict = field(default_factory=dict)
    residual: float = float("nan")

    def normalized(self) -> np.ndarray:
        """<G E_ab> with the full-dimension normalization."""
        k = self.blockTraces.shape[0]
        return self.blockTraces.T / k


def hermitization(A, z) -> np.ndarray:
    A = np.asarray(A)
    X = A - _z(z) * np.eye(A.shape[0])
    Z0 = np.zeros_like(X)
    return np.block([[Z0, X], [X.conj().T, Z0]])


def resolvent_matrices(A, z, eta: float):
    """Return (H, Ht, HX) for X = A - z; SVD based so small eta stays accurate."""
    _check_eta(eta)
    A = np.asarray(A)
    X = A - _z(z) * np.eye(A.shape[0])
    U, s, Vh = np.linalg.svd(X)
    d = 1.0 / (s * s + eta * eta)
    H = (U * d) @ U.conj().T
    Ht = (Vh.conj().T * d) @ Vh
    HX = (U * (d * s)) @ Vh
    return H, Ht, HX


def _herm_gram(X: np.ndarray, eta: float) -> np.ndarray:
    """Lower triangle of X X^* + eta^2 (BLAS herk/syrk)."""
    if np.iscomplexobj(X):
        C = blas.zherk(1.0, X, lower=1)
    else:
        C = blas.dsyrk(1.0, X, lower=1)
    C[np.diag_indices_from(C)] += eta * eta
    return C


def _cho_inverse_lower(C: np.ndarray) -> np.ndarray:
    potrf, potri = lapack.get_lapack_funcs(("potrf", "potri"), (C,))
    L, info = potrf(C, lower=1, overwrite_a=1)
    if info:
        raise SolverError(f"Cholesky failed (info={info})")
    Hl, info = potri(L, lower=1, overwrite_c=1)
    if info:
        raise SolverError(f"Cholesky inverse failed (info={info})")
    H = np.tril(Hl)
    H += np.tril(Hl, -1).conj().T
    return H


def resolvent_matrices_fast(A, z, eta: float):
    """Cholesky route for moderate eta; same output as :func:`resolvent_matrices`.

    Ht is recovered from Ht = (I - X^* H X) / eta^2, which is accurate when
    eta is of order one.
    """
    _check_eta(eta)
    A = np.asarray(A)
    N = A.shape[0]
    X = np.asarray(A - _z(z) * np.eye(N), order="F")
    H = _cho_inverse_lower(_herm_gram(X, eta))
    HX = H @ X
    Ht = -(X.conj().T @ HX)
    Ht[np.diag_indices(N)] += 1.0
    Ht /= eta * eta
    return H, Ht, HX


def h_traces_fast(A, z, eta: float):
    """(Tr H, Tr H X) from one Cholesky factor: Tr H = |L^-1|_F^2, Tr HX = <L^-1, L^-1 X>."""
    _check_eta(eta)
    A = np.asarray(A)
    N = A.shape[0]
    X = np.asarray(A - _z(z) * np.eye(N), order="F")
    C = _herm_gram(X, eta)
    potrf, trtri = lapack.get_lapack_funcs(("potrf", "trtri"), (C,))
    L, info = potrf(C, lower=1, overwrite_a=1)
    if info:
        raise SolverError(f"Cholesky failed (info={info})")
    K, info = trtri(np.tril(L), lower=1, overwrite_c=1)
    K = np.tril(K)
    trmm = blas.get_blas_funcs("trmm", (K, X))
    Y = trmm(1.0, K, X, lower=1)
    return float(np.real(np.vdot(K, K))), complex(np.vdot(K, Y))


def _g_blocks_2(H, Ht, HX, eta):
    N = H.shape[0]
    tr = lambda M: np.trace(M) / N
    return np.array([[1j * eta * tr(H), tr(HX)],
                     [tr(HX.conj().T), 1j * eta * tr(Ht)]])


def resolvent_blocks(A, z, eta: float, check: bool = True) -> ResolventBundle:
    """All 2 x 2 block traces of the Hermitized resolvent at i*eta."""
    _check_eta(eta)
    A = np.asarray(A)
    N = A.shape[0]
    H, Ht, HX = resolvent_matrices(A, z, eta)
    g = _g_blocks_2(H, Ht, HX, eta)
    residual = float("nan")
    if check:
        G = np.block([[1j * eta * H, HX], [HX.conj().T, 1j * eta * Ht]])
        R = (hermitization(A, z) - 1j * eta * np.eye(2 * N)) @ G - np.eye(2 * N)
        residual = float(np.abs(R).max())
        if residual > 1e-10:
            raise SolverError(f"resolvent residual {residual:.2e} exceeds 1e-10")
    return ResolventBundle(eta=eta, blockTraces=g, hTrace=float(np.real(np.trace(H)) / N),
                           z=_z(z), residual=residual)


def direct_resolvent(A, z, eta: float) -> np.ndarray:
    """Plain inverse of (Hermitization - i eta); reference only."""
    M = hermitization(A, z)
    return np.linalg.inv(M - 1j * eta * np.eye(M.shape[0]))


# ---------------------------------------------------------------------------
# eta_{z,t} and the trace constants
# ---------------------------------------------------------------------------

def singular_values(A, z) -> np.ndarray:
    A = np.asarray(A)
    return np.linalg.svd(A - _z(z) * np.eye(A.shape[0]), compute_uv=False)


def h_trace_from_sv(s: np.ndarray, eta: float) -> float:
    return float(np.mean(1.0 / (s * s + eta * eta)))


def solve_eta_from_sv(s: np.ndarray, t: float, C: float = DEFAULT_C) -> float:
    """Root of eta -> t <H(eta)> - 1 given the singular values."""
    if not 0 < t < 1:
        raise DomainError("t must lie in (0, 1)")
    f = lambda le: t * h_trace_from_sv(s, np.exp(le)) - 1.0
    lo, hi = np.log(t / 10), np.log(10 * t)
    for _ in range(200):
        if f(lo) > 0:
            break
        lo -= np.log(10)
    for _ in range(200):
        if f(hi) < 0:
            break
        hi += np.log(10)
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 > fhi):
        raise SolverError(f"bracket expansion failed: f({np.exp(lo):.3g})={flo:.3g}, "
                          f"f({np.exp(hi):.3g})={fhi:.3g}")
    le = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    eta = float(np.exp(le))
    res = abs(f(le))
    if res > 1e-10:
        raise SolverError(f"eta_zt residual {res:.2e} exceeds 1e-10")
    return eta


def solve_eta_zt(A, z, t: float, C: float = DEFAULT_C) -> float:
    """eta with t <H_z(eta)> = 1. The ratio eta/t is reported, not enforced."""
    return solve_eta_from_sv(singular_values(A, z), t, C)


@dataclass(frozen=True)
class TraceConstants:
    etaZT: float
    g: complex
    alpha: float
    beta: complex
    gamma: float
    sigma: float
    delta: complex
    tau: complex
    upsilon: float
    t: float
    ratio: float  # etaZT / t
    ratioInRange: bool

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = [v.real, v.imag] if isinstance(v, complex) else v
        return out


def compute_constants(A, z, t: float, C: float = DEFAULT_C) -> TraceConstants:
    """All self-consistent constants at eta_{z,t}."""
    A = np.asarray(A)
    N = A.shape[0]
    zc = _z(z)
    X = A - zc * np.eye(N)
    U, s, Vh = np.linalg.svd(X)
    eta = solve_eta_from_sv(s, t, C)
    d = 1.0 / (s * s + eta * eta)
    W = Vh @ U  # V^* U
    g = eta * np.mean(d)
    alpha = eta ** 2 * np.real(np.sum(np.outer(d, d) * np.abs(W.T) ** 2)) / N
    beta = eta * np.sum(d * d * s * np.diagonal(W)) / N
    gamma = eta ** 2 * np.sum(d * d) / N
    sigma = alpha + abs(beta) ** 2 / gamma
    ds = d * s
    delta = np.sum((ds[:, None] * W) * (ds[:, None] * W).T) / N
    tau = (gamma * delta - beta ** 2) / (gamma * sigma)
    # upsilon needs resolvents at zbar as well
    H = (U * d) @ U.conj().T
    Ht = (Vh.conj().T * d) @ Vh
    if np.isrealobj(A):
        Hb, Htb = H.conj(), Ht.conj()
    else:
        Hb, Htb, _ = resolvent_matrices(A, np.conj(zc), eta)
    Xb = A - np.conj(zc) * np.eye(N)
    u1 = N / t - np.trace(X.conj().T @ Ht @ Htb @ X)
    u2 = N / t - np.trace(X @ H @ Hb @ Xb)
    upsilon = np.pi * u1 * u2
    ratio = eta / t
    return TraceConstants(etaZT=eta, g=complex(g), alpha=float(alpha), beta=complex(beta),
                          gamma=float(gamma), sigma=float(sigma), delta=complex(delta),
                          tau=complex(tau), upsilon=float(np.real(upsilon)), t=float(t),
                          ratio=float(ratio), ratioInRange=bool(1 / C <= ratio <= C))


# ---------------------------------------------------------------------------
# Shift-parameter (4N) resolvent
# ---------------------------------------------------------------------------

def lambda_matrices(A, p: ShiftParams, eta: float):
    """(H_L, Ht_L, H_L A_L) for the real 2N x 2N shifted matrix."""
    _check_eta(eta)
    AL = shifted_matrix(A, p)
    n = AL.shape[0]
    eye = np.eye(n)
    H = sla.cho_solve(sla.cho_factor(AL @ AL.T + eta * eta * eye, lower=True), eye)
    Ht = sla.cho_solve(sla.cho_factor(AL.T @ AL + eta * eta * eye, lower=True), eye)
    return H, Ht, H @ AL


def _block_trace_matrix(G: np.ndarray, k: int) -> np.ndarray:
    N = G.shape[0] // k
    Gb = G.reshape(k, N, k, N)
    return np.einsum("aibi->ab", Gb) / N


def lambda_resolvent_matrix(A, p: ShiftParams, eta: float) -> np.ndarray:
    """Full 4N x 4N resolvent assembled from the 2N blocks."""
    H, Ht, HA = lambda_matrices(A, p, eta)
    return np.block([[1j * eta * H, HA], [HA.T, 1j * eta * Ht]])


def rotated_traces(g_w: np.ndarray, g_wbar: np.ndarray) -> np.ndarray:
    """4 x 4 block traces U^* diag(g_w, g_wbar) U."""
    D = np.zeros((4, 4), dtype=complex)
    D[:2, :2] = g_w
    D[2:, 2:] = g_wbar
    return ROT4.conj().T @ D @ ROT4


def lambda_resolvent(A, p: ShiftParams, eta: float, via_rotation: bool | None = None) -> ResolventBundle:
    """All 16 block traces of the shift-parameter resolvent.

    At theta = pi/4 the traces can be built from the 2N resolvents at w and
    wbar (``via_rotation``); otherwise the 2N real factorization is used.
    """
    _check_eta(eta)
    A = np.asarray(A)
    N = A.shape[0]
    if via_rotation is None:
        via_rotation = p.is_quarter
    if via_rotation:
        if not p.is_quarter:
            raise DomainError("rotation shortcut only holds at theta = pi/4")
        H, Ht, HX = resolvent_matrices(A, p.w, eta)
        g_w = _g_blocks_2(H, Ht, HX, eta)
        if np.isrealobj(A):
            g_wb = g_w.T.copy()
        else:
            g_wb = _g_blocks_2(*resolvent_matrices(A, np.conj(p.w), eta), eta)
        g = rotated_traces(g_w, g_wb)
        htrace = float(np.real(np.trace(H)) / N)
    else:
        H, Ht, HA = lambda_matrices(A, p, eta)
        G = np.block([[1j * eta * H, HA], [HA.T, 1j * eta * Ht]])
        g = _block_trace_matrix(G, 4)
        htrace = float(np.trace(H) / (2 * N))
    return ResolventBundle(eta=eta, blockTraces=g, hTrace=htrace, params=p)


def _ht_blocks(A, a: float, b: float, theta: float, eta: float):
    A = np.asarray(A)
    N = A.shape[0]
    if abs(theta - np.pi / 4) < 1e-15 and np.isrealobj(A):
        # quarter turn: Ht_L = [[Re Ht_w, Im Ht_w], [-Im Ht_w, Re Ht_w]]
        _, Htw, _ = resolvent_matrices(A, complex(a, b), eta)
        R, I = Htw.real, Htw.imag
        return R, I, -I, R
    AL = np.kron(np.eye(2), A) - np.kron(lambda_matrix(a, b, theta), np.eye(N))
    Ht = np.linalg.inv(AL.conj().T @ AL + eta * eta * np.eye(2 * N))
    return Ht[:N, :N], Ht[:N, N:], Ht[N:, :N], Ht[N:, N:]


def lambda_ht_blocks(A, p: ShiftParams, eta: float):
    """N x N blocks (Ht11, Ht12, Ht21, Ht22) of (A_L^T A_L + eta^2)^{-1}."""
    _check_eta(eta)
    return _ht_blocks(A, p.a, p.b, p.theta, eta)


def q_from_blocks(H11, H12, H22) -> np.ndarray:
    tr = lambda X, Y: float(np.sum(X * Y.T))  # Tr(X Y)
    q11 = tr(H11, H11)
    q12 = 2 * tr(H11, H12)
    q13 = tr(H12, H12.T)
    q22 = 2 * tr(H11, H22) + 2 * tr(H12, H12)
    q23 = 2 * tr(H22, H12)
    q33 = tr(H22, H22)
    return np.array([[q11, q12, q13], [q12, q22, q23], [q13, q23, q33]])


def q_matrix(A, p: ShiftParams, eta: float) -> np.ndarray:
    """The 3 x 3 matrix of traces of products of Ht_L blocks."""
    H11, H12, _, H22 = lambda_ht_blocks(A, p, eta)
    return q_from_blocks(H11, H12, H22)


def q_quarter_closed_form(A, z, eta: float) -> np.ndarray:
    """(N/2) [[s+p, 0, s-p], [0, 4p, 0], [s-p, 0, s+p]] with s = <Ht_z^2>, p = <Ht_z Ht_zbar>."""
    A = np.asarray(A)
    N = A.shape[0]
    _, Ht, _ = resolvent_matrices(A, z, eta)
    _, Htb, _ = resolvent_matrices(A, np.conj(_z(z)), eta)
    s = float(np.real(np.sum(Ht * Ht.T))) / N
    pp = float(np.real(np.sum(Ht * Htb.T))) / N
    return (N / 2) * np.array([[s + pp, 0, s - pp], [0, 4 * pp, 0], [s - pp, 0, s + pp]])


def q_predicted_spectrum(A, z, eta: float) -> np.ndarray:
    """{2N<Ht_z^2>, 2N<Ht_z Ht_zbar>, N<Ht_z Ht_zbar>} as stated for theta = pi/4."""
    A = np.asarray(A)
    N = A.shape[0]
    _, Ht, _ = resolvent_matrices(A, z, eta)
    _, Htb, _ = resolvent_matrices(A, np.conj(_z(z)), eta)
    s = float(np.real(np.sum(Ht * Ht.T))) / N
    pp = float(np.real(np.sum(Ht * Htb.T))) / N
    return np.sort(np.array([2 * N * s, 2 * N * pp, N * pp]))


def three_vector(A, p: ShiftParams, eta: float, t: float) -> np.ndarray:
    A = np.asarray(A)
    N = A.shape[0]
    H11, H12, _, H22 = lambda_ht_blocks(A, p, eta)
    return np.array([N / t - np.trace(H11), -2 * np.trace(H12), N / t - np.trace(H22)])


def g_matrix(A, z, t: float, C: float = DEFAULT_C) -> np.ndarray:
    """4 x 4 matrix of (t/N) Tr Ht_L (E_kl (x) Y) at eta_{z,t}, theta = pi/4.

    Y runs over i eta H_z, H_z X, X^* H_z and i eta Ht_z for the four 2 x 2
    sub-blocks; the 2 x 2 index is the outer factor, so the trace picks the
    (l, k) N-block of Ht_L.
    """
    A = np.asarray(A)
    N = A.shape[0]
    zc = _z(z)
    eta = solve_eta_zt(A, zc, t, C)
    H, Ht, HX = resolvent_matrices(A, zc, eta)
    blocks = _ht_blocks(A, zc.real, zc.imag, np.pi / 4, eta)
    L = {(0, 0): blocks[0], (0, 1): blocks[1], (1, 0): blocks[2], (1, 1): blocks[3]}
    Ys = {(0, 0): 1j * eta * H, (0, 1): HX, (1, 0): HX.conj().T, (1, 1): 1j * eta * Ht}
    G = np.zeros((4, 4), dtype=complex)
    for (bi, bj), Y in Ys.items():
        for k in range(2):
            for l in range(2):
                G[2 * bi + k, 2 * bj + l] = (t / N) * np.sum(L[(l, k)] * Y.T)
    return G
