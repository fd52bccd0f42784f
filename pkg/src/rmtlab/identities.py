"""Brute-force checks of exact identities used in the real bulk analysis.

Each ``verify_*`` routine returns an :class:`IdentityReport`. Deterministic
checks report ``mcStderr = 0``; Monte-Carlo checks report the standard error of
the sampled side and pass when the two sides agree within three of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .hermitization import ShiftParams, lambda_matrix, shifted_matrix
from .numkernel import (DimensionError, DomainError, StiefelPair, make_rng, pfaffian_batch,
                        stiefel_pairs)


class StepError(RuntimeError):
    """Finite-difference step is outside the linear regime."""


class QuadratureError(RuntimeError):
    """Successive quadrature refinements disagree."""


@dataclass
class IdentityReport:
    name: str
    lhs: complex
    rhs: complex
    mcStderr: float = 0.0
    tolAbs: float = 0.0
    tolRel: float = 1e-8
    params: dict = field(default_factory=dict)
    extraPass: bool = True

    @property
    def absError(self) -> float:
        return float(abs(self.lhs - self.rhs))

    @property
    def relError(self) -> float:
        d = abs(self.rhs)
        return float(self.absError / d) if d > 0 else float(self.absError)

    @property
    def passed(self) -> bool:
        bound = max(self.tolAbs, 3 * self.mcStderr + self.tolRel * abs(self.rhs))
        return bool(np.isfinite(self.relError) and self.absError <= bound and self.extraPass)

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": jsonable(self.lhs), "rhs": jsonable(self.rhs),
                "absError": self.absError, "relError": self.relError,
                "mcStderr": self.mcStderr, "pass": self.passed,
                "params": {k: jsonable(v) for k, v in self.params.items()}}


def jsonable(x):
    """Recursively convert numpy and complex values into JSON-ready objects."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


# ---------------------------------------------------------------------------
# Change of variables and its Jacobian
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhiPoint:
    a: float
    b: float
    theta: float
    pair: StiefelPair
    W: np.ndarray
    M1: np.ndarray

    def __post_init__(self):
        N = self.pair.N
        if N < 3:
            raise DimensionError("PhiPoint needs N >= 3")
        if self.W.shape != (N - 2, 2) or self.M1.shape != (N - 2, N - 2):
            raise DimensionError("W must be (N-2)x2 and M1 (N-2)x(N-2)")

    @property
    def N(self) -> int:
        return self.pair.N

    @property
    def lam(self) -> complex:
        return complex(self.a, self.b)


def random_phi_point(N: int, seed: int, theta: float | None = None) -> PhiPoint:
    """Seeded generic point: a in (-0.5, 0.5), b in (0.2, 0.8), theta in (0.1, 1.4)."""
    rng = make_rng(seed, 0x0F1)
    a = rng.uniform(-0.5, 0.5)
    b = rng.uniform(0.2, 0.8)
    th = rng.uniform(0.1, 1.4) if theta is None else theta
    q = np.linalg.qr(rng.standard_normal((N, 2)))[0]
    W = rng.standard_normal((N - 2, 2)) / np.sqrt(N)
    M1 = rng.standard_normal((N - 2, N - 2)) / np.sqrt(N)
    return PhiPoint(a, b, th, StiefelPair(q[:, 0].copy(), q[:, 1].copy()), W, M1)


def completion(v1, v2) -> np.ndarray:
    """Orthogonal R with R e1 = v1, R e2 = v2 (Householder QR completion)."""
    v1 = np.asarray(v1, float)
    v2 = np.asarray(v2, float)
    if abs(v1 @ v2) > 1e-10:
        raise DomainError("degenerate pair: v1 and v2 are not orthogonal")
    q, _ = np.linalg.qr(np.column_stack([v1, v2]), mode="complete")
    q[:, 0] = v1
    q[:, 1] = v2
    return q


def phi_map(p: PhiPoint) -> np.ndarray:
    N = p.N
    R = completion(p.pair.v1, p.pair.v2)
    T = np.zeros((N, N))
    T[:2, :2] = lambda_matrix(p.a, p.b, p.theta)
    T[:2, 2:] = p.W.T
    T[2:, 2:] = p.M1
    return R @ T @ R.T


def jacobian_closed_form(p: PhiPoint) -> float:
    th = p.theta
    d = np.linalg.det(p.M1 - p.lam * np.eye(p.N - 2))
    return float(16 * p.b ** 2 * abs(np.cos(2 * th)) / np.sin(2 * th) ** 2 * abs(d) ** 2)


def tangent_frame(v1, v2) -> np.ndarray:
    """Tangent directions (dv1, dv2) at the pair, shape (2N-3, 2, N).

    Row 0 is the rotation direction (v2, -v1), dual to v2^T dv1. The remaining
    rows are (r_k, 0) and (0, r_k) for the columns r_k of the completion
    beyond the first two.
    """
    N = v1.size
    R = completion(v1, v2)
    out = [np.stack([v2, -v1])]
    for k in range(2, N):
        out.append(np.stack([R[:, k], np.zeros(N)]))
        out.append(np.stack([np.zeros(N), R[:, k]]))
    return np.array(out)


def frame_selftest(v1, v2) -> dict:
    """Orthogonality and Stiefel-constraint residuals of the tangent frame."""
    fr = tangent_frame(v1, v2)
    flat = fr.reshape(len(fr), -1)
    g = flat @ flat.T
    expect = np.eye(len(fr))
    expect[0, 0] = 2.0  # |(v2, -v1)|^2
    cons = [max(abs(v1 @ d[0]), abs(v2 @ d[1]), abs(v1 @ d[1] + v2 @ d[0])) for d in fr]
    return {"gramError": float(np.abs(g - expect).max()), "constraintError": float(max(cons))}


def _retract(v1, v2):
    q, r = np.linalg.qr(np.column_stack([v1, v2]))
    q = q * np.sign(np.diag(r))[None, :]
    return StiefelPair(q[:, 0].copy(), q[:, 1].copy())


def _phi_coords(p: PhiPoint, x: np.ndarray) -> np.ndarray:
    """Phi at chart coordinates x (length N^2) around the center p."""
    N = p.N
    fr = tangent_frame(p.pair.v1, p.pair.v2)
    a, b, th = p.a + x[0], p.b + x[1], p.theta + x[2]
    k = 3 + len(fr)
    d = np.tensordot(x[3:k], fr, axes=1)
    pair = _retract(p.pair.v1 + d[0], p.pair.v2 + d[1])
    W = p.W + x[k:k + 2 * (N - 2)].reshape(N - 2, 2)
    M1 = p.M1 + x[k + 2 * (N - 2):].reshape(N - 2, N - 2)
    return phi_map(PhiPoint(a, b, th, pair, W, M1))


def fd_jacobian(p: PhiPoint, h: float) -> np.ndarray:
    N = p.N
    dim = 3 + (2 * N - 3) + 2 * (N - 2) + (N - 2) ** 2
    if dim != N * N:
        raise DimensionError("chart dimension does not match N^2")
    J = np.empty((N * N, dim))
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        J[:, i] = (_phi_coords(p, e) - _phi_coords(p, -e)).ravel() / (2 * h)
    return J


def verify_jacobian(N: int, p: PhiPoint, h: float = 1e-5) -> IdentityReport:
    if not 3 <= N <= 8 or p.N != N:
        raise DomainError("verify_jacobian needs 3 <= N <= 8 and a matching point")
    d1 = abs(np.linalg.det(fd_jacobian(p, h)))
    d2 = abs(np.linalg.det(fd_jacobian(p, h / 2)))
    closed = jacobian_closed_form(p)
    scale = max(d1, d2)
    if scale > 1e-8 and abs(d1 - d2) > 0.1 * scale:
        raise StepError(f"step {h:g} disagrees with {h / 2:g} by more than 10%")
    return IdentityReport("jacobian", d2, closed, tolAbs=1e-8, tolRel=1e-4,
                          params={"N": N, "a": p.a, "b": p.b, "theta": p.theta, "h": h,
                                  "fdCoarse": d1, **frame_selftest(p.pair.v1, p.pair.v2)})


# ---------------------------------------------------------------------------
# Pfaffian identity
# ---------------------------------------------------------------------------

def _lhs_expectation(t, lams, A2):
    """E prod_j |det(A2 + B - lam_j)|^2 with B_ij ~ N(0, t/N)."""
    n = A2.shape[0]
    N = n + 4
    s = np.sqrt(t / N)
    if n == 1:
        f = lambda x: np.prod([abs(A2[0, 0] + x - l) ** 2 for l in lams]) * \
            np.exp(-x * x / (2 * s * s)) / np.sqrt(2 * np.pi * s * s)
        return integrate.quad(f, -np.inf, np.inf, epsabs=1e-15, epsrel=1e-13)[0]
    # integrand is a polynomial of degree <= 4 in each entry: Gauss-Hermite is exact
    x, w = np.polynomial.hermite_e.hermegauss(6)
    grids = np.meshgrid(*([x] * (n * n)), indexing="ij")
    wts = np.prod(np.meshgrid(*([w] * (n * n)), indexing="ij"), axis=0).ravel()
    B = np.stack([g.ravel() for g in grids], axis=1).reshape(-1, n, n) * s
    val = np.ones(len(B))
    for l in lams:
        val *= np.abs(np.linalg.det(A2[None] + B - l * np.eye(n))) ** 2
    return float(val @ wts / np.sqrt(2 * np.pi) ** (n * n))


def pfaffian_block_matrix(X: np.ndarray, lams, A2: np.ndarray,
                          convention: str = "conjugate") -> np.ndarray:
    """M(X) = [[X (x) I, Aw], [-Aw^T, X^* (x) I]] for a stack of skew 4x4 X.

    Aw is block-diagonal with blocks D = I (x) A2 - w (x) I and conj(D). The
    ``"adjoint"`` convention uses D^* as the second block instead; the two agree
    when A2 is 1x1 and differ otherwise.
    """
    n = A2.shape[0]
    Aw = np.kron(np.eye(2), A2) - np.kron(np.diag(lams), np.eye(n))
    Awf = np.zeros((4 * n, 4 * n), complex)
    Awf[:2 * n, :2 * n] = Aw
    if convention == "conjugate":
        Awf[2 * n:, 2 * n:] = Aw.conj()
    elif convention == "adjoint":
        Awf[2 * n:, 2 * n:] = Aw.conj().T
    else:
        raise DomainError(f"unknown convention {convention!r}")
    I = np.eye(n)
    bsz = X.shape[0]
    M = np.zeros((bsz, 8 * n, 8 * n), complex)
    M[:, :4 * n, :4 * n] = np.einsum("bij,kl->bikjl", X, I).reshape(bsz, 4 * n, 4 * n)
    Xs = np.conj(np.swapaxes(X, 1, 2))
    M[:, 4 * n:, 4 * n:] = np.einsum("bij,kl->bikjl", Xs, I).reshape(bsz, 4 * n, 4 * n)
    M[:, :4 * n, 4 * n:] = Awf
    M[:, 4 * n:, :4 * n] = -Awf.T
    return M


def verify_pfaffian_identity(N: int, t: float, lambda1: complex, lambda2: complex, A2,
                             mcSamples: int = 10 ** 6, seed: int = 0,
                             chunk: int = 50_000, convention: str = "conjugate") -> IdentityReport:
    """Real Gaussian integral of |det|^2 products against a Pfaffian integral.

    Both sides carry the common factor (N / 2 pi t)^(2N - 2) left after
    normalizing the Gaussian weights.
    """
    if N not in (5, 6):
        raise DomainError("verify_pfaffian_identity supports N = 5 or 6")
    if not 0 < t <= 2:
        raise DomainError("t must lie in (0, 2]")
    if lambda1.imag == 0 or lambda2.imag == 0:
        raise DomainError("lambda1 and lambda2 must be non-real")
    A2 = np.atleast_2d(np.asarray(A2, float))
    if A2.shape != (N - 4, N - 4):
        raise DimensionError("A2 must be (N-4)x(N-4)")
    lams = (complex(lambda1), complex(lambda2))
    pref = (N / (2 * np.pi * t)) ** (2 * N - 2)
    lhs = pref * _lhs_expectation(t, lams, A2)

    rng = make_rng(seed, 0x9FA)
    s = np.sqrt(t / N / 2)
    iu = np.triu_indices(4, 1)
    total = 0j
    sq = 0.0
    pf_det_err = 0.0
    done = 0
    while done < mcSamples:
        m = min(chunk, mcSamples - done)
        z = (rng.standard_normal((m, 6)) + 1j * rng.standard_normal((m, 6))) * s
        X = np.zeros((m, 4, 4), complex)
        X[:, iu[0], iu[1]] = z
        X = X - np.swapaxes(X, 1, 2)
        M = pfaffian_block_matrix(X, lams, A2, convention)
        pf = pfaffian_batch(M)
        if done == 0:
            k = min(m, 2000)
            dets = np.linalg.det(M[:k])
            pf_det_err = float(np.max(np.abs(pf[:k] ** 2 - dets) / np.maximum(np.abs(dets), 1e-300)))
        total += pf.sum()
        sq += float((np.abs(pf) ** 2).sum())
        done += m
    mean = total / mcSamples
    var = sq / mcSamples - abs(mean) ** 2
    se = float(np.sqrt(max(var, 0.0) / (mcSamples - 1)))
    rhs = pref * mean
    rel_se = se / abs(mean) if mean != 0 else np.inf
    rep = IdentityReport("pfaffian", complex(lhs), complex(rhs), mcStderr=pref * se,
                         tolAbs=0.0, tolRel=0.0,
                         params={"N": N, "t": t, "lambda1": lams[0], "lambda2": lams[1],
                                 "mcSamples": mcSamples, "seed": seed, "convention": convention,
                                 "mcRelStderr": float(rel_se), "pfSquaredVsDet": pf_det_err,
                                 "prefactor": pref, "insufficientBudget": bool(rel_se > 0.1)})
    return rep


# ---------------------------------------------------------------------------
# Stiefel Gaussian integral through the matrix Fourier transform
# ---------------------------------------------------------------------------

def stiefel_volume(N: int) -> float:
    """Vol V^2(R^N) = area(S^{N-1}) area(S^{N-2})."""
    if N < 2:
        raise DomainError("N must be >= 2")
    area = lambda d: 2 * np.pi ** (d / 2) / special.gamma(d / 2)
    return float(area(N) * area(N - 1))


def stiefel_volume_selftest(N: int) -> float:
    """Relative error of (2 pi)^N = (1/4) Vol int det(P)^{(N-3)/2} e^{-Tr P/2} dP."""
    a = N / 2
    lg = special.multigammaln(a, 2) + 2 * a * np.log(2)
    rhs = 0.25 * stiefel_volume(N) * np.exp(lg)
    return float(abs(rhs / (2 * np.pi) ** N - 1))


def _sphere_rule(nt: int, nph: int):
    c, wc = np.polynomial.legendre.leggauss(nt)
    ph = (np.arange(nph) + 0.5) * 2 * np.pi / nph
    C, PH = np.meshgrid(c, ph, indexing="ij")
    S = np.sqrt(1 - C * C)
    dirs = np.stack([S * np.cos(PH), S * np.sin(PH), C], axis=-1).reshape(-1, 3)
    w = (wc[:, None] * np.full(nph, 2 * np.pi / nph)[None, :]).ravel()
    return dirs, w


def _fourier_p_integral(Ht_half: np.ndarray, N: int, kappa: float, nt: int, nph: int, nr: int,
                        psi0: float = np.pi / 4) -> complex:
    """int over symmetric 2x2 P of e^{i kappa Tr P} det[I + i Ht^{1/2}(P (x) I)Ht^{1/2}]^{-1/2}.

    Spherical coordinates in (p11, p22, p12); each ray is rotated into the
    complex half-plane where e^{i kappa Tr P} decays. Branch points sit on the
    imaginary axis of the ray variable, so any rotation below pi/2 is safe.
    """
    dirs, wd = _sphere_rule(nt, nph)
    I = np.eye(N)
    u, wu = np.polynomial.legendre.leggauss(nr)
    u = (u + 1) / 2
    wu = wu / 2
    rho = u / (1 - u)
    drho = 1 / (1 - u) ** 2
    total = 0j
    for (p11, p22, p12), w in zip(dirs, wd):
        K = Ht_half @ np.kron(np.array([[p11, p12], [p12, p22]]), I) @ Ht_half
        mu = np.linalg.eigvalsh(K)
        tau = p11 + p22
        psi = psi0 if tau >= 0 else -psi0
        e = np.exp(1j * psi)
        r = rho * e
        logf = 1j * kappa * tau * r - 0.5 * np.log1p(1j * r[:, None] * mu[None, :]).sum(axis=1)
        total += w * np.sum(wu * drho * r * r * np.exp(logf)) * e
    return total


def stiefel_fourier_rhs(A, p: ShiftParams, t: float, eta: float = 0.1, levels=(16, 32, 64)):
    """Fourier-side value of the Stiefel integral, with successive refinements.

    Returns (value, relative change between the last two levels).
    """
    N = A.shape[0]
    kappa = N / (2 * t)
    AL = shifted_matrix(A, p)
    Cp = AL.T @ AL + eta * eta * np.eye(2 * N)
    w, V = np.linalg.eigh(Cp)
    Ht_half = (V / np.sqrt(w)) @ V.T
    logpre = (N - 3) * np.log(np.pi) + (3 - N) * np.log(kappa) + (N / t) * eta * eta \
        - 0.5 * np.log(w).sum()
    vals = []
    for n in levels:
        vals.append(_fourier_p_integral(Ht_half, N, kappa, n, 2 * n, 2 * n))
    change = abs(vals[-1] - vals[-2]) / abs(vals[-1])
    return np.exp(logpre) * vals[-1], float(change)


def stated_fourier_constant_ratio(N: int) -> float:
    """Stated closed-form prefactor over the derived one, for the first shift (j = 1).

    Derived: pi^(N-3) kappa^(3-N); stated form: (N/2 pi t)^(-N) N^3 t^-3 /
    (2^(5/2) pi^(7/2)). The ratio is sqrt(2/pi), independent of N and t.
    """
    return float(np.sqrt(2 / np.pi))


def verify_stiefel_gaussian(N: int, p: ShiftParams, t: float, A=None, seed: int = 0,
                            mcSamples: int = 400_000, eta: float = 0.1,
                            chunk: int = 100_000) -> IdentityReport:
    """Haar Monte-Carlo of int_V exp(-(N/2t)|A_Lambda v|^2) dv against its Fourier form."""
    if not 5 <= N <= 8:
        raise DomainError("verify_stiefel_gaussian needs 5 <= N <= 8")
    if A is None:
        A = make_rng(seed, 0x57F).standard_normal((N, N)) / np.sqrt(N)
    A = np.asarray(A, float)
    AL = shifted_matrix(A, p)
    kappa = N / (2 * t)
    rng = make_rng(seed, 0x57E)
    vals = []
    done = 0
    while done < mcSamples:
        m = min(chunk, mcSamples - done)
        q = stiefel_pairs(N, m, rng)
        x = np.concatenate([q[:, :, 0], q[:, :, 1]], axis=1)
        y = x @ AL.T
        vals.append(np.exp(-kappa * np.einsum("ij,ij->i", y, y)))
        done += m
    vals = np.concatenate(vals)
    vol = stiefel_volume(N)
    lhs = vol * vals.mean()
    se = vol * vals.std(ddof=1) / np.sqrt(len(vals))
    rhs, change = stiefel_fourier_rhs(A, p, t, eta)
    if change > 0.05:
        raise QuadratureError(f"Fourier quadrature refinements disagree by {change:.2%}")
    rep = IdentityReport("stiefel_gaussian", complex(lhs), complex(rhs), mcStderr=float(se),
                         tolAbs=0.0, tolRel=0.0,
                         params={"N": N, "a": p.a, "b": p.b, "theta": p.theta, "t": t,
                                 "eta": eta, "mcSamples": mcSamples, "seed": seed,
                                 "quadratureChange": change, "imagRhs": float(np.imag(rhs)),
                                 "fittedConstant": float(lhs / (rhs.real * stated_fourier_constant_ratio(N))),
                                 "volumeSelftest": stiefel_volume_selftest(N)})
    rep.extraPass = abs(lhs - rhs) <= max(0.02 * abs(rhs), 3 * se)
    rep.tolRel = 0.02
    return rep


# ---------------------------------------------------------------------------
# Determinant ratio
# ---------------------------------------------------------------------------

def _psd_sqrt(H):
    w, V = np.linalg.eigh(H)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def det_ratio_sides(A, p: ShiftParams, eta: float) -> tuple[float, float]:
    """log of both sides of the determinant-ratio identity."""
    A = np.asarray(A, float)
    N = A.shape[0]
    I = np.eye(N)
    lam = p.w
    X = A - lam * I
    AL = shifted_matrix(A, p)
    l1 = np.linalg.slogdet(X.conj().T @ X + eta * eta * I)[1]
    l2 = np.linalg.slogdet(AL.T @ AL + eta * eta * np.eye(2 * N))[1]
    H = np.linalg.inv(X @ X.conj().T + eta * eta * I)
    Xb = A - np.conj(lam) * I
    Ht = np.linalg.inv(Xb.conj().T @ Xb + eta * eta * I)
    Hh = _psd_sqrt(H)
    c = p.b ** 2 * (np.tan(p.theta) - 1 / np.tan(p.theta)) ** 2 * eta * eta
    r = -0.5 * np.linalg.slogdet(I + c * Hh @ Ht @ Hh)[1]
    return float(l1 - 0.5 * l2), float(r)


def verify_det_ratio(N: int, p: ShiftParams, eta: float, seed: int = 0, A=None) -> IdentityReport:
    if N > 100:
        raise DomainError("verify_det_ratio evaluates dense determinants; use N <= 100")
    if A is None:
        A = make_rng(seed, 0xDE7).standard_normal((N, N)) / np.sqrt(N)
    lhs, rhs = det_ratio_sides(A, p, eta)
    return IdentityReport("det_ratio", np.exp(lhs), np.exp(rhs), tolAbs=0.0, tolRel=1e-8,
                          params={"N": N, "a": p.a, "b": p.b, "theta": p.theta, "eta": eta,
                                  "seed": seed, "logLhs": lhs, "logRhs": rhs,
                                  "rhsAtMostOne": bool(rhs <= 1e-14)})


# ---------------------------------------------------------------------------
# HCIZ proportionality on U(2)
# ---------------------------------------------------------------------------

def _haar_u2_batch(rng, m):
    g = (rng.standard_normal((m, 2, 2)) + 1j * rng.standard_normal((m, 2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def hciz_closed_form(z1: complex, z2: complex) -> complex:
    E = np.exp(np.outer([z1, z2], np.conj([z1, z2])))
    return complex(np.linalg.det(E) / abs(z1 - z2) ** 2)


def hciz_ratio(z1: complex, z2: complex, mcSamples: int, seed: int):
    """(R, stderr) with R = MC integral / closed form."""
    if z1 == z2:
        raise DomainError("HCIZ ratio needs z1 != z2")
    rng = make_rng(seed, 0x1C2)
    U1 = _haar_u2_batch(rng, mcSamples)
    U2 = _haar_u2_batch(rng, mcSamples)
    Z = np.diag([z1, z2])
    Zb = Z.conj()
    L = np.conj(np.swapaxes(U2, 1, 2)) @ Zb @ U2
    Rm = np.conj(np.swapaxes(U1, 1, 2)) @ Z @ U1
    vals = np.exp(np.einsum("bij,bji->b", L, Rm))
    cf = hciz_closed_form(z1, z2)
    mean = vals.mean() / cf
    se = np.sqrt(vals.real.var(ddof=1) + vals.imag.var(ddof=1)) / np.sqrt(mcSamples) / abs(cf)
    return complex(mean), float(se)


def verify_hciz_ratio(zPairs, mcSamples: int = 200_000, seed: int = 0) -> IdentityReport:
    rs, ses = [], []
    for i, (z1, z2) in enumerate(zPairs):
        r, s = hciz_ratio(complex(z1), complex(z2), mcSamples, seed + i)
        rs.append(r)
        ses.append(s)
    rs = np.array(rs)
    ses = np.array(ses)
    pair_ok = True
    max_pair = 0.0
    for i in range(len(rs)):
        for j in range(i + 1, len(rs)):
            d = abs(rs[i] - rs[j])
            max_pair = max(max_pair, d)
            pair_ok &= bool(d <= 3 * np.hypot(ses[i], ses[j]))
    one_ok = bool(np.all(np.abs(rs - 1) <= 3 * ses))
    mean_r = complex(np.mean(rs))
    rep = IdentityReport("hciz_ratio", mean_r, 1.0 + 0j,
                         mcStderr=float(np.sqrt((ses ** 2).sum()) / len(ses)), tolRel=0.0,
                         params={"ratios": [complex(r) for r in rs], "stderrs": ses.tolist(),
                                 "maxPairwiseDiff": max_pair, "pairwiseConsistent": pair_ok,
                                 "allWithinOfOne": one_ok, "mcSamples": mcSamples, "seed": seed})
    rep.extraPass = pair_ok and one_ok
    return rep
