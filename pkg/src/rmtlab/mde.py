"""Matrix Dyson equation in the 4 x 4 block reduction, m^z(w), local laws.

The deterministic approximation of the shift-parameter resolvent is
``M = m (x) I_N`` where the 4 x 4 matrix m solves

    (i eta + Z + S(m)) m + I = 0,      eta * Im m > 0,

with Z = [[0, L], [L^T, 0]] and S the block-trace covariance map. Entries of m
are block-normalized traces, so the identity appears with coefficient 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensembles import EnsembleSpec, sample_matrix
from .hermitization import (ROT4, ShiftParams, h_traces_fast, lambda_matrices,
                            resolvent_matrices_fast, rotated_traces)
from .numkernel import DomainError


class MdeSolverError(RuntimeError):
    pass


class StabilityError(RuntimeError):
    pass


class BranchError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def s_operator(t: np.ndarray) -> np.ndarray:
    """Swap the two diagonal 2 x 2 blocks and drop the off-diagonal ones."""
    t = np.asarray(t)
    out = np.zeros_like(t)
    out[:2, :2] = t[2:, 2:]
    out[2:, 2:] = t[:2, :2]
    return out


def z4(p: ShiftParams) -> np.ndarray:
    L = p.lam()
    Z = np.zeros((4, 4))
    Z[:2, 2:] = L
    Z[2:, :2] = L.T
    return Z


def mde_residual(m: np.ndarray, p: ShiftParams, eta: float) -> float:
    R = (1j * eta * np.eye(4) + z4(p) + s_operator(m)) @ m + np.eye(4)
    return float(np.abs(R).max())


def _unit(k: int) -> np.ndarray:
    e = np.zeros(16, dtype=complex)
    e[k] = 1
    return e.reshape(4, 4)


_UNITS = [_unit(k) for k in range(16)]


def _linear_map_matrix(f) -> np.ndarray:
    return np.column_stack([f(E).ravel() for E in _UNITS])


def _is_positive(m: np.ndarray) -> bool:
    im = (m - m.conj().T) / 2j
    return bool(np.linalg.eigvalsh(im).min() > 0)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

@dataclass
class MdeSolution:
    m: np.ndarray
    eta: float
    params: ShiftParams
    residual: float
    iterations: int
    method: str = "fixed-point"
    schedule: list = field(default_factory=list)

    @property
    def m11(self) -> np.ndarray:
        return self.m[:2, :2]


def _fixed_point(m, eta, Z, damping, tol, max_iter):
    eye = np.eye(4)
    for it in range(1, max_iter + 1):
        new = -np.linalg.inv(1j * eta * eye + Z + s_operator(m))
        step = damping * (new - m)
        m = m + step
        if not _is_positive(m):
            raise MdeSolverError("iterate left the positive cone")
        if np.abs(step).max() < tol:
            return m, it, True
    return m, max_iter, False


def _newton(m, eta, Z, tol, max_iter=60):
    eye = np.eye(4)
    for it in range(1, max_iter + 1):
        K = 1j * eta * eye + Z + s_operator(m)
        r = K @ m + eye
        if np.abs(r).max() < tol:
            return m, it, True
        J = _linear_map_matrix(lambda E: K @ E + s_operator(E) @ m)
        m = m + np.linalg.solve(J, -r.ravel()).reshape(4, 4)
    r = (1j * eta * eye + Z + s_operator(m)) @ m + eye
    return m, max_iter, bool(np.abs(r).max() < tol)


def solve_mde(p: ShiftParams, eta: float, damping: float = 0.5, tol: float = 1e-13,
              max_iter: int = 100_000, fp_budget: int = 5_000) -> MdeSolution:
    """Solve the 4 x 4 MDE.

    Damped fixed-point iteration from m = iI. When it stalls (its contraction
    rate degrades like eta) the solution is tracked down a geometric eta ladder
    with Newton steps, starting from the fixed-point solution at eta = 1.
    """
    if not eta > 0:
        raise DomainError("eta must be positive")
    Z = z4(p)
    schedule = [("fixed-point", float(eta), damping)]
    m, its, ok = _fixed_point(1j * np.eye(4, dtype=complex), eta, Z, damping, tol,
                              min(fp_budget, max_iter))
    total = its
    method = "fixed-point"
    if ok:
        m, nits, _ = _newton(m, eta, Z, 1e-14, max_iter=5)
        total += nits
    else:
        method = "continuation"
        start = max(1.0, eta)
        m, its, ok = _fixed_point(1j * np.eye(4, dtype=complex), start, Z, damping, tol, max_iter)
        total += its
        if not ok:
            raise MdeSolverError(f"fixed point did not converge at eta={start}; schedule={schedule}")
        n_steps = max(2, int(np.ceil(8 * np.log10(start / eta))) + 1)
        ladder = np.geomspace(start, eta, n_steps)[1:]
        schedule.append(("newton-ladder", float(start), float(eta), int(len(ladder))))
        for e in ladder:
            m, its, ok = _newton(m, e, Z, 1e-14)
            total += its
            if not ok or not _is_positive(m):
                raise MdeSolverError(f"continuation failed at eta={e:.3g}; schedule={schedule}")
    res = mde_residual(m, p, eta)
    if not _is_positive(m):
        raise MdeSolverError("solution is not in the positive cone")
    if res > 1e-12:
        m2, its, _ = _newton(m, eta, Z, 1e-15, max_iter=10)
        total += its
        if mde_residual(m2, p, eta) < res:
            m, res = m2, mde_residual(m2, p, eta)
    if res > 1e-12:
        raise MdeSolverError(f"residual {res:.2e} above 1e-12; schedule={schedule}")
    return MdeSolution(m=m, eta=float(eta), params=p, residual=res, iterations=total,
                       method=method, schedule=schedule)


# ---------------------------------------------------------------------------
# Small-eta expansion and stability operator
# ---------------------------------------------------------------------------

def small_eta_expansion(p: ShiftParams) -> dict:
    """Leading term and closed-form first-order correction for the (1,1) 2 x 2 block.

    m11(eta) ~ leading + i eta S.
    """
    a, b, th = p.a, p.b, p.theta
    q = 1 - a * a - b * b
    if q <= 0:
        raise DomainError("a^2 + b^2 must be below 1")
    t, c = np.tan(th), 1 / np.tan(th)
    leading = 1j * np.sqrt(q) * np.diag([c, t])
    s11 = -1 + (1 + c * c) / (4 * q) + (1 - a * a) * (1 - c * c) / (4 * b * b)
    s22 = -1 + (1 + t * t) / (4 * q) + (1 - a * a) * (1 - t * t) / (4 * b * b)
    s12 = -(a / (2 * b)) * (t - c)
    return {"leading": leading, "correction": np.array([[s11, s12], [s12, s22]])}


def numerical_slope(p: ShiftParams, etas=(1e-2, 1e-3, 1e-4)) -> list[np.ndarray]:
    """(m11(eta) - leading) / (i eta) for each eta."""
    lead = small_eta_expansion(p)["leading"]
    return [np.real((solve_mde(p, e).m11 - lead) / (1j * e)) for e in etas]


@dataclass
class StabilitySpectrum:
    eigenvalues: np.ndarray
    predicted: dict
    unitCount: int

    def others(self) -> np.ndarray:
        ev = self.eigenvalues
        idx = np.argsort(np.abs(ev - 1))[self.unitCount:]
        return np.sort_complex(ev[idx])


def x_operator_matrix(m: np.ndarray) -> np.ndarray:
    return _linear_map_matrix(lambda Y: Y - s_operator(m @ Y @ m))


def b_operator_matrix(m: np.ndarray) -> np.ndarray:
    """Y -> Y - m S(Y) m, the adjoint of X under the trace pairing."""
    return _linear_map_matrix(lambda Y: Y - m @ s_operator(Y) @ m)


def predicted_stability(p: ShiftParams, eta: float) -> dict:
    a, b, th = p.a, p.b, p.theta
    w2 = a * a + b * b
    bp = (np.tan(th) + 1 / np.tan(th)) * eta / (2 * np.sqrt(1 - w2))
    bm = 2 * (1 - w2)
    u = 1 - a * a + b * b
    root = np.sqrt(complex(u * u - 4 * b * b))
    return {"beta_plus": float(bp), "beta_minus": float(bm),
            "gamma_plus": complex(u + root), "gamma_minus": complex(u - root)}


def x_spectrum(sol: MdeSolution, tol: float = 1e-10) -> StabilitySpectrum:
    ev = np.linalg.eigvals(x_operator_matrix(sol.m))
    unit = int(np.sum(np.abs(ev - 1) < tol))
    return StabilitySpectrum(eigenvalues=ev, predicted=predicted_stability(sol.params, sol.eta),
                             unitCount=unit)


# ---------------------------------------------------------------------------
# Scalar m^z(w)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarMz:
    z: complex
    w: complex
    m: complex
    residual: float


def _mz_residual(m, z2, w):
    # scaled by the largest term so that tiny |m| (outside the disk) is judged fairly
    return abs(1 / m + w + m - z2 / (w + m)) / max(1.0, abs(1 / m), abs(z2 / (w + m)))


def _mz_roots(z2, w):
    return np.roots([1.0, 2 * w, w * w + 1 - z2, w])


def _polish(m, z2, w):
    for _ in range(4):
        f = m ** 3 + 2 * w * m * m + (w * w + 1 - z2) * m + w
        df = 3 * m * m + 4 * w * m + (w * w + 1 - z2)
        if df == 0:
            break
        m = m - f / df
    return m


def solve_mz(z, w: complex) -> ScalarMz:
    """Root of m^3 + 2w m^2 + (w^2 + 1 - |z|^2) m + w = 0 with Im m Im w > 0."""
    w = complex(w)
    if w.imag == 0:
        raise DomainError("Im w must be non-zero")
    z = complex(getattr(z, "z", z))
    z2 = abs(z) ** 2

    def valid(roots, ww):
        return [r for r in roots if r.imag * ww.imag > 0 and abs(ww + r) > 1e-300]

    cand = valid(_mz_roots(z2, w), w)
    if len(cand) == 1:
        m = cand[0]
    elif not cand:
        raise BranchError(f"no root with Im m * Im w > 0 at w={w}")
    else:
        # continuation from far away along the vertical line
        sgn = np.sign(w.imag)
        path = w.real + 1j * sgn * np.geomspace(max(10.0, abs(w.imag)), abs(w.imag), 60)
        m = None
        for ww in path:
            c = valid(_mz_roots(z2, ww), ww)
            if not c:
                raise BranchError(f"no admissible root along continuation at w={ww}")
            m = c[0] if m is None else min(c, key=lambda r: abs(r - m))
    m = complex(_polish(complex(m), z2, w))
    res = _mz_residual(m, z2, w)
    if res > 1e-12:
        raise BranchError(f"m^z residual {res:.2e} above 1e-12")
    return ScalarMz(z=z, w=w, m=m, residual=float(res))


def im_mz_on_axis(z, etas) -> np.ndarray:
    return np.array([solve_mz(z, 1j * e).m.imag for e in np.atleast_1d(etas)])


# ---------------------------------------------------------------------------
# Local laws
# ---------------------------------------------------------------------------

def _quarter_rotation_blocks(A, w, eta):
    """Block traces (4x4) at theta = pi/4 from Cholesky traces of the 2N resolvent."""
    N = A.shape[0]
    trH, trHX = h_traces_fast(A, w, eta)
    g_w = np.array([[1j * eta * trH, trHX], [np.conj(trHX), 1j * eta * trH]]) / N
    return rotated_traces(g_w, g_w.T)


def lambda_block_traces(A, p: ShiftParams, eta: float) -> np.ndarray:
    A = np.asarray(A)
    if p.is_quarter and np.isrealobj(A):
        return _quarter_rotation_blocks(A, p.w, eta)
    H, Ht, HA = lambda_matrices(A, p, eta)
    N = A.shape[0]
    G = np.block([[1j * eta * H, HA], [HA.T, 1j * eta * Ht]])
    return np.einsum("aibi->ab", G.reshape(4, N, 4, N)) / N


def one_resolvent_error(A, p: ShiftParams, eta: float, m: np.ndarray) -> float:
    """max over (alpha, beta) of |<(G - M) E_ab>| with the 4N normalization."""
    g = lambda_block_traces(A, p, eta)
    return float(np.abs(g - m).max() / 4)


def _summary(errors: np.ndarray) -> dict:
    return {"median": float(np.median(errors)), "p90": float(np.quantile(errors, 0.9)),
            "mean": float(np.mean(errors)), "samples": int(len(errors))}


def fit_slope(Ns, values) -> float:
    """Least-squares slope of log(values) against log(N)."""
    x, y = np.log(np.asarray(Ns, float)), np.log(np.asarray(values, float))
    return float(np.polyfit(x, y, 1)[0])


def local_law_stats(spec: EnsembleSpec, p: ShiftParams, eta: float, samples: int,
                    seeds=None) -> dict:
    """Per-sample one-resolvent errors and their summary at fixed N."""
    N = spec.N
    if not eta > N ** (-0.5 + 0.05):
        raise DomainError("eta must exceed N^(-1/2 + 0.05)")
    m = solve_mde(p, eta).m
    seeds = list(range(spec.seed, spec.seed + samples)) if seeds is None else list(seeds)
    errors = np.array([one_resolvent_error(sample_matrix(spec.with_seed(s)), p, eta, m)
                       for s in seeds])
    out = _summary(errors)
    out.update({"N": N, "eta": eta, "errors": errors})
    return out


def local_law_sweep(family: str, Ns, p: ShiftParams, eta: float, samples: int,
                    seed: int = 0, two_resolvent: bool = False) -> dict:
    rows = []
    for N in Ns:
        spec = EnsembleSpec(family, int(N), seed=seed)
        fn = two_resolvent_stats if two_resolvent else local_law_stats
        rows.append(fn(spec, p, eta, samples=samples))
    slope = fit_slope([r["N"] for r in rows], [r["median"] for r in rows])
    return {"rows": rows, "slope": slope, "eta": eta}


# two-resolvent ------------------------------------------------------------

ALL_PAIRS = [((a, b), (c, d)) for a in range(4) for b in range(4) for c in range(4) for d in range(4)]


def _unit4(a, b):
    e = np.zeros((4, 4))
    e[a, b] = 1
    return e


def deterministic_two_resolvent(m: np.ndarray, pairs, binding: str = "right") -> np.ndarray:
    """<M E M X^{-1}(E')> ("right") or <B^{-1}(M E M) E'> ("left"), 4N-normalized.

    B(Y) = Y - m S(Y) m is the adjoint of X(Y) = Y - S(m Y m) under
    (Y1, Y2) -> tr(Y1 Y2), so both bindings agree.
    """
    X = x_operator_matrix(m)
    B = b_operator_matrix(m)
    if np.linalg.cond(X) > 1e12:
        raise StabilityError("stability operator is numerically singular")
    out = np.zeros(len(pairs), dtype=complex)
    for k, ((a, b), (c, d)) in enumerate(pairs):
        E, Ep = _unit4(a, b), _unit4(c, d)
        if binding == "right":
            xinv = np.linalg.solve(X, Ep.ravel()).reshape(4, 4)
            out[k] = np.trace(m @ E @ m @ xinv) / 4
        else:
            binv = np.linalg.solve(B, (m @ E @ m).ravel()).reshape(4, 4)
            out[k] = np.trace(binv @ Ep) / 4
    return out


def _trace_gram(blocks: list[np.ndarray]) -> np.ndarray:
    n = len(blocks)
    T = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            T[i, j] = T[j, i] = np.einsum("ij,ji->", blocks[i], blocks[j])
    return T


def empirical_two_resolvent(A, p: ShiftParams, eta: float, pairs) -> np.ndarray:
    """<G E G E'> = Tr(G_{b'a} G_{b a'}) / 4N for the shift-parameter resolvent."""
    A = np.asarray(A)
    N = A.shape[0]
    if p.is_quarter and np.isrealobj(A):
        H, Ht, HX = resolvent_matrices_fast(A, p.w, eta)
        gw = {(0, 0): 1j * eta * H, (0, 1): HX, (1, 0): HX.conj().T, (1, 1): 1j * eta * Ht}
        base, keys = [], []
        for (q, r), B in gw.items():
            base.append(B)
            keys.append((q, r))
        for (q, r), B in gw.items():  # G_wbar = G_w^T
            base.append(gw[(r, q)].T)
            keys.append((2 + q, 2 + r))
        T = _trace_gram(base)
        R = ROT4
        # G_xy = sum_k conj(R[p_k, x]) R[q_k, y] D_k
        coef = np.array([[[np.conj(R[pk, x]) * R[qk, y] for (pk, qk) in keys]
                          for y in range(4)] for x in range(4)])
        out = np.zeros(len(pairs), dtype=complex)
        for k, ((a, b), (c, d)) in enumerate(pairs):
            out[k] = coef[d, a] @ T @ coef[b, c]
        return out / (4 * N)
    H, Ht, HA = lambda_matrices(A, p, eta)
    G = np.block([[1j * eta * H, HA], [HA.T, 1j * eta * Ht]]).reshape(4, N, 4, N)
    out = np.zeros(len(pairs), dtype=complex)
    for k, ((a, b), (c, d)) in enumerate(pairs):
        out[k] = np.sum(G[d, :, a, :] * G[b, :, c, :].T)
    return out / (4 * N)


def two_resolvent_stats(spec: EnsembleSpec, p: ShiftParams, eta: float, samples: int,
                        pairs=None, seeds=None, binding: str = "right") -> dict:
    N = spec.N
    if not eta > N ** (-1 / 6 + 0.05):
        raise DomainError("eta must exceed N^(-1/6 + 0.05)")
    pairs = ALL_PAIRS if pairs is None else list(pairs)
    m = solve_mde(p, eta).m
    det = deterministic_two_resolvent(m, pairs, binding)
    seeds = list(range(spec.seed, spec.seed + samples)) if seeds is None else list(seeds)
    errors = np.array([np.abs(empirical_two_resolvent(sample_matrix(spec.with_seed(s)), p, eta,
                                                      pairs) - det).max() for s in seeds])
    out = _summary(errors)
    out.update({"N": N, "eta": eta, "errors": errors, "binding": binding})
    return out
