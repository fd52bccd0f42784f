import numpy as np
import pytest

from rmtlab.ensembles import EnsembleSpec, sample_matrix
from rmtlab.hermitization import (BulkPoint, ShiftParams, compute_constants, direct_resolvent,
                                  h_traces_fast, lambda_resolvent, q_matrix, q_quarter_closed_form,
                                  resolvent_blocks, resolvent_matrices, resolvent_matrices_fast,
                                  solve_eta_zt, three_vector)
from rmtlab.numkernel import DomainError

QUARTER = np.pi / 4


@pytest.fixture(scope="module")
def A():
    return sample_matrix(EnsembleSpec("gaussian", 60, seed=3))


def test_block_resolvent_matches_direct_inverse(A):
    z, eta = 0.2 + 0.3j, 0.4
    G = direct_resolvent(A, z, eta)
    H, Ht, HX = resolvent_matrices(A, z, eta)
    N = A.shape[0]
    assert np.allclose(G[:N, :N], 1j * eta * H)
    assert np.allclose(G[N:, N:], 1j * eta * Ht)
    assert np.allclose(G[:N, N:], HX)


def test_fast_path_agrees(A):
    z, eta = -0.1 + 0.5j, 0.2
    for x, y in zip(resolvent_matrices(A, z, eta), resolvent_matrices_fast(A, z, eta)):
        assert np.allclose(x, y, atol=1e-10)
    tr, _ = h_traces_fast(A, z, eta)
    assert tr == pytest.approx(np.trace(resolvent_matrices(A, z, eta)[0]).real, rel=1e-10)


def test_resolvent_blocks_rejects_bad_eta(A):
    with pytest.raises(DomainError):
        resolvent_blocks(A, 0.1j, 0.0)


def test_eta_solves_trace_equation(A):
    z, t = 0.3 + 0.4j, 0.1
    eta = solve_eta_zt(A, z, t)
    tr, _ = h_traces_fast(A, z, eta)
    assert abs(t * tr / A.shape[0] - 1) < 1e-10


def test_constants_are_finite(A):
    c = compute_constants(A, 0.3 + 0.4j, 0.1)
    d = c.to_dict()
    assert all(np.isfinite(v) for v in (c.etaZT, c.sigma, c.alpha, c.beta, c.gamma))
    assert d["t"] == 0.1 and c.sigma > 0


def test_rotation_identity(A):
    p = ShiftParams(0.3, 0.4, QUARTER)
    g_rot = lambda_resolvent(A, p, 0.3, via_rotation=True).blockTraces
    g_dir = lambda_resolvent(A, p, 0.3, via_rotation=False).blockTraces
    assert np.abs(g_rot - g_dir).max() < 1e-10


def test_rotation_shortcut_needs_quarter(A):
    with pytest.raises(DomainError):
        lambda_resolvent(A, ShiftParams(0.3, 0.4, 0.6), 0.3, via_rotation=True)


def test_q_quarter_closed_form(A):
    p = ShiftParams(0.3, 0.4, QUARTER)
    assert np.allclose(q_matrix(A, p, 0.25), q_quarter_closed_form(A, p.w, 0.25), rtol=1e-10)


def test_three_vector_vanishes_at_eta_zt(A):
    t = 0.1
    p = ShiftParams(0.3, 0.4, QUARTER)
    eta = solve_eta_zt(A, p.w, t)
    assert np.abs(three_vector(A, p, eta, t)).max() < 1e-8 * A.shape[0] / t


def test_shift_params_validation():
    with pytest.raises(DomainError):
        ShiftParams(0.3, -0.1, 0.5)
    with pytest.raises(DomainError):
        ShiftParams(0.3, 0.4, 0.01)
    assert BulkPoint(0.3, 0.4).z == 0.3 + 0.4j
