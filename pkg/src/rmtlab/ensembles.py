"""Random-matrix samplers and moment-matched laws.

Entry laws are standardized (mean 0, variance 1) and scaled by
``sqrt(variance)`` as the last step. ``customMoments`` always refers to the
standardized entry, i.e. (m1, m2, m3, m4) of ``A_ij / sqrt(variance)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .numkernel import DomainError, make_rng

FAMILIES = ("gaussian", "rademacher", "uniform", "complexGinibre", "custom")


class InfeasibleMomentsError(ValueError):
    """No real law has the requested moments."""


@dataclass(frozen=True)
class ThreePointLaw:
    """Mean-zero law on {-a, 0, c} with P(-a) = p, P(c) = q."""

    a: float
    c: float
    p: float
    q: float

    def moment(self, k: int) -> float:
        return self.p * (-self.a) ** k + self.q * self.c ** k

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size)
        out = np.zeros(size)
        out[u < self.p] = -self.a
        out[(u >= self.p) & (u < self.p + self.q)] = self.c
        return out


def three_point_from_moments(m2: float, m3: float, m4: float) -> ThreePointLaw:
    """Mean-zero three-point law with the given second, third, fourth moments.

    With k = a p = c q one gets c - a = m3/m2 and a c = m4/m2 - (m3/m2)^2; the
    mass at zero is 1 - m2/(a c), so feasibility is exactly the Hankel condition
    m2 m4 - m3^2 >= m2^3.
    """
    if m2 <= 0:
        raise InfeasibleMomentsError("second moment must be positive")
    d = m3 / m2
    ac = m4 / m2 - d * d
    hankel = m2 * m4 - m3 * m3 - m2 ** 3
    if hankel < -1e-14 * max(1.0, abs(m2 * m4)):
        raise InfeasibleMomentsError(
            f"moments (m2={m2:g}, m3={m3:g}, m4={m4:g}) violate m2*m4 - m3^2 >= m2^3")
    ac = max(ac, m2)
    a = (-d + np.sqrt(d * d + 4 * ac)) / 2
    c = a + d
    k = m2 / (a + c)
    p, q = k / a, k / c
    if p + q > 1:  # rounding at the two-point boundary
        s = p + q
        p, q = p / s, q / s
    return ThreePointLaw(float(a), float(c), float(p), float(q))


@dataclass(frozen=True)
class EnsembleSpec:
    family: str
    N: int
    seed: int = 0
    variance: float | None = None
    customMoments: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if int(self.N) < 1:
            raise DomainError("N must be >= 1")
        if self.family == "custom":
            if self.customMoments is None or len(self.customMoments) != 4:
                raise DomainError("custom family needs customMoments (m1, m2, m3, m4)")
            object.__setattr__(self, "customMoments", tuple(float(x) for x in self.customMoments))

    @property
    def var(self) -> float:
        return 1.0 / self.N if self.variance is None else float(self.variance)

    def with_seed(self, seed: int) -> "EnsembleSpec":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["customMoments"] is not None:
            d["customMoments"] = list(d["customMoments"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        allowed = {"family", "N", "seed", "variance", "customMoments"}
        extra = set(d) - allowed
        if extra:
            raise DomainError(f"unknown EnsembleSpec keys: {sorted(extra)}")
        cm = d.get("customMoments")
        return cls(family=d["family"], N=int(d["N"]), seed=int(d.get("seed", 0)),
                   variance=None if d.get("variance") is None else float(d["variance"]),
                   customMoments=None if cm is None else tuple(float(x) for x in cm))


def standardized_moments(spec: EnsembleSpec) -> tuple[float, float, float, float]:
    """(m1, m2, m3, m4) of the standardized real entry law."""
    if spec.family == "gaussian":
        return (0.0, 1.0, 0.0, 3.0)
    if spec.family == "rademacher":
        return (0.0, 1.0, 0.0, 1.0)
    if spec.family == "uniform":
        return (0.0, 1.0, 0.0, 9.0 / 5.0)
    if spec.family == "custom":
        return spec.customMoments  # type: ignore[return-value]
    raise DomainError("complexGinibre has no real standardized moments")


def _custom_law(spec: EnsembleSpec) -> ThreePointLaw:
    m1, m2, m3, m4 = spec.customMoments  # type: ignore[misc]
    if abs(m1) > 1e-15:
        raise InfeasibleMomentsError("custom laws must be centred (m1 = 0)")
    return three_point_from_moments(m2, m3, m4)


def sample_entries(spec: EnsembleSpec, size, rng: np.random.Generator) -> np.ndarray:
    s = np.sqrt(spec.var)
    f = spec.family
    if f == "gaussian":
        x = rng.standard_normal(size)
    elif f == "rademacher":
        x = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    elif f == "uniform":
        x = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size)
    elif f == "complexGinibre":
        x = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)
    else:
        x = _custom_law(spec).sample(rng, size)
    return x * s


def sample_matrix(spec: EnsembleSpec) -> np.ndarray:
    """N x N matrix with i.i.d. entries of the requested law."""
    rng = make_rng(spec.seed, 0xA11)
    return sample_entries(spec, (spec.N, spec.N), rng)


def perturb_with_ginibre(A, t: float, seed: int) -> np.ndarray:
    """Return A + sqrt(t) B with B real Ginibre (entry variance 1/N)."""
    if t < 0:
        raise DomainError("t must be non-negative")
    A = np.asarray(A)
    if t == 0:
        return A.copy()
    N = A.shape[0]
    rng = make_rng(seed, 0xB0B)
    B = rng.standard_normal(A.shape) / np.sqrt(N)
    return A + np.sqrt(t) * B


@dataclass(frozen=True)
class MatchedPair:
    """Law of A (with A + sqrt(t) B) matched to sqrt(1+t) times a target law."""

    base: EnsembleSpec
    target: EnsembleSpec
    t: float
    delta: float
    achievedMoments: dict = field(default_factory=dict)
    fourthMomentGap: float = 0.0
    law: str = "three_point"

    def sample_left(self, seed: int) -> np.ndarray:
        """A + sqrt(t) B for the constructed A law."""
        A = sample_matrix(self.base.with_seed(seed))
        return perturb_with_ginibre(A, self.t, seed)

    def sample_right(self, seed: int) -> np.ndarray:
        """sqrt(1+t) times a target-law matrix."""
        return np.sqrt(1 + self.t) * sample_matrix(self.target.with_seed(seed))


def construct_matched_pair(target: EnsembleSpec, t: float, delta: float = 0.1,
                           prefer_gaussian: bool = True) -> MatchedPair:
    """Find a law for A such that A + sqrt(t) B matches sqrt(1+t) * target.

    Moments 1-3 are matched exactly. The fourth is matched exactly when the
    Hankel condition allows it; otherwise the two-point floor is used and the
    gap is checked against N^(-2-delta).
    """
    if not 0 < t < 1:
        raise DomainError("t must lie in (0, 1)")
    if target.family == "complexGinibre":
        raise DomainError("matching is defined for real entry laws")
    N = target.N
    v = target.var
    mu = standardized_moments(target)
    # raw moments of sqrt(1+t) * target entry
    tgt = {1: 0.0, 2: (1 + t) * v * mu[1], 3: (1 + t) ** 1.5 * v ** 1.5 * mu[2],
           4: (1 + t) ** 2 * v * v * mu[3]}
    g2 = t / N  # variance of sqrt(t) B_ij
    m2 = tgt[2] - g2
    m3 = tgt[3]
    m4 = tgt[4] - 6 * m2 * g2 - 3 * g2 * g2
    if m2 <= 0:
        raise InfeasibleMomentsError("target variance too small for the Gaussian component")
    floor = (m2 ** 3 + m3 * m3) / m2
    gap = 0.0
    if m4 < floor:
        gap = floor - m4
        if gap > N ** (-2 - delta):
            raise InfeasibleMomentsError(
                f"required fourth moment {m4:.4g} is below the floor {floor:.4g}; "
                f"gap {gap:.3g} exceeds N^(-2-delta) = {N ** (-2 - delta):.3g}")
        m4 = floor
    sd = np.sqrt(m2)
    std = (0.0, 1.0, m3 / sd ** 3, m4 / sd ** 4)
    gaussian_like = abs(std[2]) < 1e-14 and abs(std[3] - 3.0) < 1e-12
    if gaussian_like and prefer_gaussian:
        base = EnsembleSpec("gaussian", N, target.seed, variance=m2)
        law = "gaussian"
    else:
        base = EnsembleSpec("custom", N, target.seed, variance=m2, customMoments=std)
        law = "three_point"
    achieved_A = {1: 0.0, 2: m2, 3: m3, 4: m4}
    left = {1: 0.0, 2: m2 + g2, 3: m3, 4: m4 + 6 * m2 * g2 + 3 * g2 * g2}
    return MatchedPair(base=base, target=target, t=float(t), delta=float(delta),
                       achievedMoments={"A": achieved_A, "left": left, "target": tgt},
                       fourthMomentGap=float(left[4] - tgt[4]), law=law)
