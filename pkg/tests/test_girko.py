import numpy as np
import pytest

from rmtlab.ensembles import EnsembleSpec, construct_matched_pair, sample_matrix
from rmtlab.girko import (TestFunction, ZeroFunction, comparison_experiment, girko_functional,
                          mismatched_pair, refinement_change)
from rmtlab.mde import im_mz_on_axis
from rmtlab.girko import im_m_scaled


def test_laplacian_matches_finite_differences():
    assert TestFunction(radius=1.2).fd_check() < 1e-4


def test_test_function_integral_is_positive():
    f = TestFunction()
    assert f.integral() > 0 and f.laplacian_l1() > 0


@pytest.fixture(scope="module")
def A():
    return sample_matrix(EnsembleSpec("gaussian", 200, seed=9))


def test_zero_function_gives_zero(A):
    r = girko_functional(A, ZeroFunction(), 0.3 + 0.4j, 0.3)
    assert r.direct == 0 and r.integral == 0


def test_girko_tracks_direct_sum(A):
    r = girko_functional(A, TestFunction(), 0.3 + 0.4j, 0.3)
    assert r.relative < 0.1


def test_far_from_spectrum(A):
    r = girko_functional(A, TestFunction(), 3.0, 0.3)
    assert r.direct == 0 and abs(r.integral) < 1e-4


def test_refinement_is_stable(A):
    assert refinement_change(A, TestFunction(), 0.3 + 0.4j, 0.3) < 1e-2


def test_scaled_m_is_plain_m_at_unit_scale():
    assert im_m_scaled(0.3 + 0.1j, 0.2, 1.0) == pytest.approx(im_mz_on_axis(0.3 + 0.1j, [0.2])[0])


def test_comparison_self_check_is_exact():
    pair = construct_matched_pair(EnsembleSpec("gaussian", 60), 0.1, prefer_gaussian=False)
    out = comparison_experiment(pair, None, [0.3 + 0.4j], 1, 100, self_check=True)
    assert out["difference"] == 0.0


def test_mismatched_pair_changes_variance():
    pair = construct_matched_pair(EnsembleSpec("gaussian", 60), 0.1)
    bad = mismatched_pair(pair, 1.5)
    assert bad.base.var == pytest.approx(1.5 * pair.base.var)
