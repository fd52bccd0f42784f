import numpy as np
import pytest

from rmtlab.ensembles import EnsembleSpec, sample_matrix
from rmtlab.hermitization import ShiftParams
from rmtlab.mde import (ALL_PAIRS, deterministic_two_resolvent, empirical_two_resolvent, fit_slope,
                        im_mz_on_axis, mde_residual, one_resolvent_error, small_eta_expansion,
                        solve_mde, solve_mz, x_spectrum)


@pytest.mark.parametrize("eta", [2.0, 0.3, 1e-2, 1e-4])
def test_solver_residual(eta):
    p = ShiftParams(0.2, 0.5, 0.7)
    sol = solve_mde(p, eta)
    assert sol.residual < 1e-12
    assert mde_residual(sol.m, p, eta) < 1e-12
    # Im M is positive definite
    assert np.linalg.eigvalsh((sol.m - sol.m.conj().T) / 2j).min() > 0


def test_small_eta_leading_term():
    p = ShiftParams(0.3, 0.4, np.pi / 4)
    lead = small_eta_expansion(p)["leading"]
    assert np.abs(solve_mde(p, 1e-4).m11 - lead).max() < 1e-3


def test_unit_eigenvalues_of_stability_operator():
    spec = x_spectrum(solve_mde(ShiftParams(0.1, 0.3, 0.9), 0.01))
    assert spec.unitCount == 8
    assert len(spec.others()) == 8


def test_scalar_mz_against_large_matrix():
    # <Im G> of a large Ginibre hermitization is close to Im m^z
    z, eta = 0.3 + 0.2j, 0.2
    A = sample_matrix(EnsembleSpec("gaussian", 800, seed=1))
    N = A.shape[0]
    X = A - z * np.eye(N)
    ev = np.linalg.svd(X, compute_uv=False) ** 2
    emp = np.mean(eta / (ev + eta ** 2))
    assert emp == pytest.approx(im_mz_on_axis(z, [eta])[0], abs=0.01)
    assert solve_mz(z, 1j * eta).m.imag > 0


def test_local_law_errors_are_small():
    p = ShiftParams(0.3, 0.4, np.pi / 4)
    m = solve_mde(p, 0.5).m
    A = sample_matrix(EnsembleSpec("gaussian", 300, seed=2))
    assert one_resolvent_error(A, p, 0.5, m) < 0.05
    det = deterministic_two_resolvent(m, ALL_PAIRS)
    emp = empirical_two_resolvent(A, p, 0.5, ALL_PAIRS)
    assert np.abs(emp - det).max() < 0.2


def test_fit_slope_exact_power():
    Ns = [100, 200, 400]
    assert fit_slope(Ns, [3.0 / n for n in Ns]) == pytest.approx(-1.0)
