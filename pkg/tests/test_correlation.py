import numpy as np
import pytest
from scipy import integrate

from rmtlab.correlation import (InsufficientDataError, estimate_pair_correlation,
                                ginue_rho, ginue_rho2_bin_average, ginue_rho2_radial,
                                pair_test_statistic)
from rmtlab.numkernel import DomainError


def test_kernel_diagonal():
    assert ginue_rho([0.3 + 0.1j]) == pytest.approx(1 / np.pi, abs=1e-12)
    assert abs(ginue_rho([0.5j, 0.5j])) < 1e-12


def test_two_point_translation_invariant():
    w = 0.7 - 0.4j
    assert ginue_rho([0.2, 0.2 + w]) == pytest.approx(ginue_rho2_radial(abs(w)), abs=1e-12)


def test_bin_average_against_quadrature():
    lo, hi = 0.3, 0.9
    num, _ = integrate.quad(lambda r: ginue_rho2_radial(r) * r, lo, hi)
    assert ginue_rho2_bin_average(lo, hi) == pytest.approx(num / ((hi * hi - lo * lo) / 2), rel=1e-10)


def _uniform_points(n_samples, k, side, seed):
    rng = np.random.default_rng(seed)
    return [rng.uniform(-side / 2, side / 2, k) + 1j * rng.uniform(-side / 2, side / 2, k)
            for _ in range(n_samples)]


def test_uniform_points_are_flat():
    k, side = 800, 20.0  # box covers the candidate disk of radius 2 * window
    # sigma = 1/k makes the rescaling the identity
    est = estimate_pair_correlation(_uniform_points(60, k, side, 0), 0, 1 / k, window=4, bins=8)
    target = k * (k - 1) / side ** 4
    assert np.all(np.abs(est.values - target) < 5 * est.stderr)


def test_mass_balance_and_csv():
    est = estimate_pair_correlation(_uniform_points(30, 100, 12.0, 1), 0, 0.01, window=4, bins=8)
    mb = est.mass_balance()
    assert mb is not None
    text = est.to_csv()
    assert text.startswith("# ")
    assert text.splitlines()[1] == "bin_lo,bin_hi,rho_hat,stderr"


def test_too_few_samples():
    with pytest.raises(DomainError):
        estimate_pair_correlation(_uniform_points(5, 10, 12.0, 2), 0, 0.1)
    with pytest.raises(InsufficientDataError):
        estimate_pair_correlation(_uniform_points(20, 10, 1.0, 2), 50.0, 0.1)


def test_ginibre_chi2_and_smooth_statistic():
    from rmtlab.ensembles import EnsembleSpec, sample_matrix
    from rmtlab.numkernel import eigenvalues
    spectra = [eigenvalues(sample_matrix(EnsembleSpec("complexGinibre", 200, seed=s)))
               for s in range(40)]
    est = estimate_pair_correlation(spectra, 0.2 + 0.2j, 1.0, window=3, bins=12)
    assert est.chi2_test()["p"] > 1e-3
    g = lambda w: np.exp(-abs(w) ** 2)
    mean, se, pred = pair_test_statistic(spectra, 0.2 + 0.2j, 1.0, g, g, window=3)
    assert abs(mean - pred) < 4 * se
