"""GinUE kernel and empirical pair correlation near a bulk point.

Eigenvalues are rescaled to w = sqrt(N sigma) (z - lambda). Ordered pairs of
rescaled points are binned by separation r, with the reference point restricted
to the disk |w| < L. With that normalization the estimator targets the bin
average of the two-point function, which for GinUE is (1 - e^{-r^2}) / pi^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .ensembles import EnsembleSpec, perturb_with_ginibre, sample_matrix
from .hermitization import BulkPoint, compute_constants
from .numkernel import DomainError, Spectrum, eigenvalues

DEFAULT_WINDOW = 4.0
DEFAULT_BINS = 24


class InsufficientDataError(RuntimeError):
    """No eigenvalues fell inside the estimation window."""


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------

def ginue_kernel(z1, z2):
    """K(z1, z2) = exp(-(|z1|^2 + |z2|^2)/2 + z1 conj(z2)) / pi."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    return np.exp(-(np.abs(z1) ** 2 + np.abs(z2) ** 2) / 2 + z1 * np.conj(z2)) / np.pi


def ginue_rho(points) -> float:
    """k-point GinUE correlation function, 1 <= k <= 6."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    k = pts.size
    if not 1 <= k <= 6:
        raise DomainError(f"ginue_rho supports 1..6 points, got {k}")
    K = ginue_kernel(pts[:, None], pts[None, :])
    val = float(np.linalg.det(K).real)
    return max(val, 0.0) if val > -1e-12 else val


def ginue_rho2_radial(r):
    """Translation-invariant two-point function (1 - e^{-r^2}) / pi^2."""
    r = np.asarray(r, dtype=float)
    return -np.expm1(-r * r) / np.pi ** 2


def ginue_rho2_bin_average(lo, hi):
    """Area average of the radial two-point function over annuli [lo, hi)."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    d = hi * hi - lo * lo
    return (1 - (np.exp(-lo * lo) - np.exp(-hi * hi)) / d) / np.pi ** 2


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

@dataclass
class CorrelationEstimate:
    center: complex
    sigmaUsed: float
    window: float
    binEdges: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    nSamples: int
    nPairs: int
    perSample: np.ndarray = field(repr=False)
    mode: str = "radial"
    metadata: dict = field(default_factory=dict)

    @property
    def binArea(self) -> np.ndarray:
        e = self.binEdges
        if self.mode == "radial":
            return np.pi * (e[1:] ** 2 - e[:-1] ** 2)
        step = e[1] - e[0]
        return np.full(self.values.shape, step * step)

    @property
    def referenceArea(self) -> float:
        return np.pi * self.window ** 2

    def reference(self) -> np.ndarray:
        if self.mode != "radial":
            raise DomainError("reference profile is defined for radial mode")
        return ginue_rho2_bin_average(self.binEdges[:-1], self.binEdges[1:])

    def expected_counts(self) -> np.ndarray:
        return self.nSamples * self.referenceArea * self.binArea * self.reference()

    def chi2_test(self, min_expected: float = 5.0) -> dict:
        """Chi-square of the radial profile against GinUE, merging sparse bins."""
        exp = self.expected_counts()
        groups, cur, acc = [], [], 0.0
        for i, e in enumerate(exp):
            cur.append(i)
            acc += e
            if acc >= min_expected:
                groups.append(cur)
                cur, acc = [], 0.0
        if cur:
            if groups:
                groups[-1].extend(cur)
            else:
                groups.append(cur)
        # Pearson statistic with a per-group Fano factor: ordered pairs are
        # counted twice when both ends sit in the reference disk, so counts
        # are overdispersed relative to Poisson.
        counts = self.perSample * (self.referenceArea * self.binArea)
        chi2 = 0.0
        for g in groups:
            c = counts[:, g].sum(axis=1)
            obs, e = c.sum(), exp[g].sum()
            fano = c.var(ddof=1) / c.mean() if obs > 0 and len(c) > 1 else 2.0
            fano = fano if fano > 0 else 2.0
            chi2 += (obs - e) ** 2 / (fano * e)
        dof = len(groups)
        return {"chi2": float(chi2), "dof": dof, "p": float(stats.chi2.sf(chi2, dof)),
                "groups": groups}

    def mass_balance(self) -> tuple[float, float]:
        """(integral of the estimate over bins, mean pair count / reference area)."""
        lhs = float(self.values @ self.binArea.ravel()) if self.values.ndim == 1 else \
            float((self.values * self.binArea).sum())
        rhs = self.nPairs / self.nSamples / self.referenceArea
        return lhs, rhs

    def to_csv(self) -> str:
        head = "# " + json.dumps(self.metadata_dict(), sort_keys=True)
        rows = ["bin_lo,bin_hi,rho_hat,stderr"]
        if self.mode != "radial":
            raise DomainError("CSV export is defined for radial mode")
        for lo, hi, v, s in zip(self.binEdges[:-1], self.binEdges[1:], self.values, self.stderr):
            rows.append(f"{lo:.17g},{hi:.17g},{v:.17g},{s:.17g}")
        return "\n".join([head, *rows]) + "\n"

    def metadata_dict(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "sigma": self.sigmaUsed,
                "window": self.window, "nSamples": self.nSamples, "nPairs": self.nPairs,
                "mode": self.mode, **self.metadata}


def _as_points(s) -> tuple[np.ndarray, int]:
    if isinstance(s, Spectrum):
        return np.asarray(s.eigenvalues, complex), s.sourceDim
    arr = np.asarray(s, complex)
    return arr, arr.size


def _rescaled(s, z: complex, sigma: float) -> np.ndarray:
    pts, N = _as_points(s)
    return np.sqrt(N * sigma) * (z - pts)


def _pair_offsets(w: np.ndarray, L: float) -> np.ndarray:
    """Offsets w_j - w_i over ordered pairs with |w_i| < L and |w_j - w_i| < L."""
    ref_idx = np.flatnonzero(np.abs(w) < L)
    cand_idx = np.flatnonzero(np.abs(w) < 2 * L)
    if ref_idx.size == 0:
        return np.empty(0, complex)
    d = w[cand_idx][None, :] - w[ref_idx][:, None]
    keep = (np.abs(d) < L) & (ref_idx[:, None] != cand_idx[None, :])
    return d[keep]


def estimate_pair_correlation(samples, z, sigma: float, window: float = DEFAULT_WINDOW,
                              bins: int = DEFAULT_BINS, mode: str = "radial",
                              metadata: dict | None = None) -> CorrelationEstimate:
    """Binned two-point function of rescaled eigenvalues around ``z``.

    ``mode="grid"`` bins the offset w_j - w_i on a bins x bins square grid of
    half-width ``window`` instead of radially, which exposes anisotropy.
    """
    z = complex(z.z if isinstance(z, BulkPoint) else z)
    if len(samples) < 20:
        raise DomainError("at least 20 samples are required")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    L = float(window)
    if mode == "radial":
        edges = np.linspace(0.0, L, bins + 1)
        area = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    elif mode == "grid":
        edges = np.linspace(-L, L, bins + 1)
        area = np.full((bins, bins), (edges[1] - edges[0]) ** 2)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    ref_area = np.pi * L * L
    per = []
    n_pairs = 0
    n_ref = 0
    for s in samples:
        w = _rescaled(s, z, sigma)
        n_ref += int((np.abs(w) < L).sum())
        d = _pair_offsets(w, L)
        n_pairs += d.size
        if mode == "radial":
            h, _ = np.histogram(np.abs(d), bins=edges)
        else:
            h, _, _ = np.histogram2d(d.real, d.imag, bins=[edges, edges])
        per.append(h / (ref_area * area))
    if n_ref == 0:
        raise InsufficientDataError(f"no eigenvalues within the window around z={z}")
    per = np.array(per)
    n = per.shape[0]
    return CorrelationEstimate(center=z, sigmaUsed=float(sigma), window=L, binEdges=edges,
                               values=per.mean(axis=0),
                               stderr=per.std(axis=0, ddof=1) / np.sqrt(n),
                               nSamples=n, nPairs=int(n_pairs),
                               perSample=per.reshape(n, -1) if mode == "radial" else per,
                               mode=mode, metadata=dict(metadata or {}))


def pair_test_statistic(samples, z, sigma: float, g, h, window: float = DEFAULT_WINDOW):
    """Smooth-test-function form: mean over samples of sum_{i != j} g(|w_i|) h(|w_j - w_i|).

    ``g`` and ``h`` are radial profiles supported in [0, window). Returns
    (mean, stderr, GinUE prediction). The prediction uses translation
    invariance of the limit: (2 pi int g s ds)(2 pi int h rho2 r dr).
    """
    from scipy.integrate import quad

    z = complex(z.z if isinstance(z, BulkPoint) else z)
    L = float(window)
    vals = []
    for s in samples:
        w = _rescaled(s, z, sigma)
        idx = np.flatnonzero(np.abs(w) < 2 * L)
        ww = w[idx]
        d = np.abs(ww[None, :] - ww[:, None])
        np.fill_diagonal(d, np.inf)
        gi = np.where(np.abs(ww) < L, g(np.abs(ww)), 0.0)
        hj = np.where(d < L, h(np.minimum(d, L)), 0.0)
        vals.append(float(gi @ hj.sum(axis=1)))
    vals = np.array(vals)
    gint = 2 * np.pi * quad(lambda s: g(s) * s, 0, L, limit=200)[0]
    hint = 2 * np.pi * quad(lambda r: h(r) * ginue_rho2_radial(r) * r, 0, L, limit=200)[0]
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals))), gint * hint


# ---------------------------------------------------------------------------
# Universality comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniversalityConfig:
    """One ensemble in a comparison. ``sigma`` is a number or ``"computed"``."""

    spec: EnsembleSpec
    t: float = 0.0
    sigma: float | str = 1.0
    label: str = ""
    sigmaSamples: int = 3

    @property
    def name(self) -> str:
        return self.label or f"{self.spec.family}(t={self.t:g})"


def config_matrix(cfg: UniversalityConfig, seed: int) -> np.ndarray:
    A = sample_matrix(cfg.spec.with_seed(seed))
    return perturb_with_ginibre(A, cfg.t, seed) if cfg.t > 0 else A


def config_sigma(cfg: UniversalityConfig, z: complex, seeds) -> float:
    """sigma_{z,t} averaged over the unperturbed matrices of the first few seeds."""
    if cfg.sigma != "computed":
        return float(cfg.sigma)
    if cfg.t <= 0:
        raise DomainError("computed sigma needs t > 0")
    vals = [compute_constants(sample_matrix(cfg.spec.with_seed(s)), z, cfg.t).sigma
            for s in list(seeds)[:cfg.sigmaSamples]]
    return float(np.mean(vals))


def sample_spectra(cfg: UniversalityConfig, seeds, mapper=map) -> list[Spectrum]:
    return list(mapper(_spectrum_task, [(cfg, int(s)) for s in seeds]))


def _spectrum_task(args):
    cfg, seed = args
    return eigenvalues(config_matrix(cfg, seed))


@dataclass
class UniversalityReport:
    center: complex
    estimates: dict
    sigmas: dict
    chi2: dict
    pairwise: dict

    def all_pass(self, p_min: float = 0.01, k: float = 3.0) -> bool:
        return all(v["maxZ"] < k for v in self.pairwise.values())


def compare_estimates(e1: CorrelationEstimate, e2: CorrelationEstimate) -> dict:
    diff = e1.values - e2.values
    se = np.sqrt(e1.stderr ** 2 + e2.stderr ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        zsc = np.where(se > 0, np.abs(diff) / se, np.where(diff == 0, 0.0, np.inf))
    return {"maxAbsDiff": float(np.abs(diff).max()), "maxZ": float(zsc.max()),
            "zScores": zsc.tolist()}


def universality_report(configs, z, samples: int = 200, seed: int = 0,
                        window: float = DEFAULT_WINDOW, bins: int = DEFAULT_BINS,
                        mapper=map) -> UniversalityReport:
    """Estimate the pair correlation for each config and compare them.

    Each config uses seeds seed..seed+samples-1, so a config compared with
    itself gives identical histograms.
    """
    if len(configs) < 2:
        raise DomainError("universality_report needs at least two configs")
    z = complex(z.z if isinstance(z, BulkPoint) else z)
    seeds = range(seed, seed + samples)
    est, sig, chi = {}, {}, {}
    for i, cfg in enumerate(configs):
        key = f"{i}:{cfg.name}"
        sig[key] = config_sigma(cfg, z, seeds)
        spectra = sample_spectra(cfg, seeds, mapper)
        est[key] = estimate_pair_correlation(
            spectra, z, sig[key], window, bins,
            metadata={"family": cfg.spec.family, "N": cfg.spec.N, "t": cfg.t, "seed": seed})
        chi[key] = est[key].chi2_test()
    keys = list(est)
    pairwise = {f"{a}|{b}": compare_estimates(est[a], est[b])
                for i, a in enumerate(keys) for b in keys[i + 1:]}
    return UniversalityReport(center=z, estimates=est, sigmas=sig, chi2=chi, pairwise=pairwise)
