import numpy as np
import pytest

from rmtlab.hermitization import ShiftParams
from rmtlab.identities import (completion, det_ratio_sides, fd_jacobian, frame_selftest,
                               hciz_ratio, jacobian_closed_form, pfaffian_block_matrix, phi_map,
                               random_phi_point, stiefel_volume, stiefel_volume_selftest,
                               verify_det_ratio, verify_hciz_ratio, verify_jacobian,
                               verify_pfaffian_identity)
from rmtlab.numkernel import DomainError, haar_orthogonal, pfaffian


def test_phi_map_spectrum_and_similarity():
    p = random_phi_point(5, 1)
    M = phi_map(p)
    expect = np.concatenate([[p.lam, np.conj(p.lam)], np.linalg.eigvals(p.M1)])
    got = np.linalg.eigvals(M)
    assert np.allclose(np.sort_complex(got), np.sort_complex(expect), atol=1e-8)
    Q = haar_orthogonal(5, np.random.default_rng(0))
    assert np.allclose(np.sort_complex(np.linalg.eigvals(Q @ M @ Q.T)), np.sort_complex(got),
                       atol=1e-8)


def test_phi_map_eigenvector():
    p = random_phi_point(6, 2)
    v = np.sin(p.theta) * p.pair.v1 + 1j * np.cos(p.theta) * p.pair.v2
    assert np.abs(phi_map(p) @ v - p.lam * v).max() < 1e-10


def test_completion_columns():
    p = random_phi_point(4, 3)
    R = completion(p.pair.v1, p.pair.v2)
    assert np.array_equal(R[:, 0], p.pair.v1) and np.array_equal(R[:, 1], p.pair.v2)
    assert np.allclose(R.T @ R, np.eye(4))
    with pytest.raises(DomainError):
        completion(p.pair.v1, p.pair.v1)


def test_tangent_frame():
    p = random_phi_point(5, 4)
    st = frame_selftest(p.pair.v1, p.pair.v2)
    assert st["gramError"] < 1e-12 and st["constraintError"] < 1e-12


def test_jacobian_generic_point():
    rep = verify_jacobian(3, random_phi_point(3, 5, theta=0.5))
    assert rep.relError < 1e-4


def test_jacobian_quarter_turn_degenerates():
    p = random_phi_point(4, 6, theta=np.pi / 4)
    assert jacobian_closed_form(p) < 1e-12
    assert abs(np.linalg.det(fd_jacobian(p, 1e-5))) < 1e-8


def test_jacobian_theta_ratio():
    p1 = random_phi_point(4, 7, theta=0.4)
    p2 = random_phi_point(4, 7, theta=1.1)
    fd = abs(np.linalg.det(fd_jacobian(p1, 1e-5)) / np.linalg.det(fd_jacobian(p2, 1e-5)))
    f = lambda th: abs(np.cos(2 * th)) / np.sin(2 * th) ** 2
    assert fd == pytest.approx(f(0.4) / f(1.1), rel=1e-3)


def test_pfaffian_block_matrix_square():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    X = X - X.T
    M = pfaffian_block_matrix(X[None], (0.3 + 0.4j, -0.1 + 0.2j), np.array([[0.5]]))[0]
    assert np.allclose(M, -M.T)
    assert pfaffian(M) ** 2 == pytest.approx(np.linalg.det(M), rel=1e-9)


def test_pfaffian_identity_small_budget():
    rep = verify_pfaffian_identity(5, 1.0, 0.3 + 0.4j, -0.1 + 0.2j, [[0.5]], mcSamples=200_000)
    assert rep.passed


def test_stiefel_volume():
    assert stiefel_volume(3) == pytest.approx(8 * np.pi ** 2)
    assert stiefel_volume_selftest(6) < 1e-12


def test_det_ratio():
    rep = verify_det_ratio(20, ShiftParams(0.2, 0.5, 0.6), 0.3, seed=1)
    assert rep.relError < 1e-8
    assert rep.rhs.real <= 1 + 1e-12
    lhs, rhs = det_ratio_sides(np.random.default_rng(2).standard_normal((10, 10)) / np.sqrt(10),
                               ShiftParams(0.1, 0.4, np.pi / 4), 0.2)
    assert lhs == pytest.approx(rhs, abs=1e-8) and rhs == pytest.approx(0.0, abs=1e-12)


def test_hciz_conjugation_symmetry():
    r1, s1 = hciz_ratio(0.3 + 0.4j, -0.2 + 0.1j, 50_000, 3)
    r2, s2 = hciz_ratio(0.3 - 0.4j, -0.2 - 0.1j, 50_000, 4)
    assert abs(r1 - r2) < 3 * np.hypot(s1, s2)
    rep = verify_hciz_ratio([(0.3 + 0.4j, -0.2 + 0.1j), (0.5j, 0.5)], mcSamples=50_000)
    assert rep.passed
