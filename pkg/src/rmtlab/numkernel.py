"""Deterministic numeric primitives: Pfaffians, real eigenvalues, Haar sampling.

Every random routine takes an integer seed and builds its own counter-based
generator, so results never depend on global state or on call order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Raised for inputs of the wrong shape or parity."""


class DomainError(ValueError):
    """Raised when a parameter is outside the supported range."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by ``(seed, *stream)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Pfaffians
# ---------------------------------------------------------------------------

def skew_from_upper(n: int, upper) -> np.ndarray:
    """Build an n x n skew matrix from its strict upper triangle (row-major)."""
    if n % 2:
        raise DimensionError(f"skew matrix dimension must be even, got {n}")
    upper = np.asarray(upper)
    iu = np.triu_indices(n, 1)
    if upper.shape[-1] != len(iu[0]):
        raise DimensionError("wrong number of upper-triangular entries")
    m = np.zeros(upper.shape[:-1] + (n, n), dtype=np.result_type(upper, float))
    m[..., iu[0], iu[1]] = upper
    return m - np.swapaxes(m, -1, -2)


def pfaffian_batch(m) -> np.ndarray:
    """Pfaffians of a stack of skew matrices, shape (..., n, n).

    Parlett-Reid elimination with partial pivoting; the sign of each row/column
    swap is accumulated. Convention: Pf([[0, a], [-a, 0]]) = a.
    """
    a = np.array(m, dtype=np.result_type(m, float), copy=True)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError("expected square matrices")
    n = a.shape[-1]
    if n % 2:
        raise DimensionError(f"Pfaffian needs an even dimension, got {n}")
    batch_shape = a.shape[:-2]
    a = a.reshape((-1, n, n))
    nb = a.shape[0]
    pf = np.ones(nb, dtype=a.dtype)
    if n == 0:
        return pf.reshape(batch_shape)
    idx = np.arange(nb)
    for k in range(0, n - 1, 2):
        kp = k + 1 + np.abs(a[:, k + 1:, k]).argmax(axis=1)
        swapped = kp != k + 1
        if swapped.any():
            r1 = a[idx, k + 1, :].copy()
            a[idx, k + 1, :] = a[idx, kp, :]
            a[idx, kp, :] = r1
            c1 = a[idx, :, k + 1].copy()
            a[idx, :, k + 1] = a[idx, :, kp]
            a[idx, :, kp] = c1
            pf = np.where(swapped, -pf, pf)
        piv = a[:, k, k + 1]
        zero = piv == 0
        pf = pf * piv
        if k + 2 < n:
            safe = np.where(zero, 1, piv)
            tau = a[:, k, k + 2:] / safe[:, None]
            col = a[:, k + 2:, k + 1]
            a[:, k + 2:, k + 2:] += tau[:, :, None] * col[:, None, :] - col[:, :, None] * tau[:, None, :]
    return pf.reshape(batch_shape)


def pfaffian(m) -> complex | float:
    """Pfaffian of one even-dimensional skew-symmetric matrix."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise DimensionError("pfaffian expects a single matrix")
    return pfaffian_batch(m[None])[0].item()


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    sourceDim: int

    def __post_init__(self):
        if len(self.eigenvalues) != self.sourceDim:
            raise DimensionError("eigenvalue count differs from source dimension")


def eigenvalues_real(m) -> Spectrum:
    """Full spectrum of a real square matrix (LAPACK geev behind this boundary)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    ev = np.linalg.eigvals(m).astype(complex)
    return Spectrum(ev, m.shape[0])


def eigenvalues(m) -> Spectrum:
    """Spectrum of a real or complex square matrix."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if np.isrealobj(m):
        return eigenvalues_real(m)
    return Spectrum(np.linalg.eigvals(m), m.shape[0])


# ---------------------------------------------------------------------------
# Haar sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StiefelPair:
    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        tol = 1e-12
        if abs(np.linalg.norm(self.v1) - 1) > tol or abs(np.linalg.norm(self.v2) - 1) > tol:
            raise DomainError("Stiefel pair vectors must have unit norm")
        if abs(self.v1 @ self.v2) > tol:
            raise DomainError("Stiefel pair vectors must be orthogonal")

    @property
    def N(self) -> int:
        return self.v1.shape[0]


def _haar_qr(g: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    ph = d / np.abs(d)
    return q * ph[None, :].conj() if np.iscomplexobj(g) else q * np.sign(d)[None, :]


def haar_orthogonal(N: int, rng: np.random.Generator) -> np.ndarray:
    return _haar_qr(rng.standard_normal((N, N)))


def haar_unitary(N: int, rng: np.random.Generator) -> np.ndarray:
    g = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def stiefel_pairs(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of Haar points on V^2(R^N), shape (count, N, 2)."""
    g = rng.standard_normal((count, N, 2))
    q, r = np.linalg.qr(g)
    s = np.sign(np.diagonal(r, axis1=1, axis2=2))
    return q * s[:, None, :]


def sample_haar(mode: str, seed: int, N: int | None = None):
    """Haar sample: ``stiefel2`` (needs N >= 3), ``orthogonal`` or ``unitary2``."""
    rng = make_rng(seed, 0x4A1)
    if mode == "stiefel2":
        if N is None or N < 3:
            raise DomainError("stiefel2 needs N >= 3")
        q = haar_orthogonal(N, rng)
        v1, v2 = q[:, 0].copy(), q[:, 1].copy()
        return StiefelPair(v1, v2)
    if mode == "orthogonal":
        if N is None or N < 1:
            raise DomainError("orthogonal needs N >= 1")
        return haar_orthogonal(N, rng)
    if mode == "unitary2":
        return haar_unitary(2, rng)
    raise DomainError(f"unknown Haar mode {mode!r}")
