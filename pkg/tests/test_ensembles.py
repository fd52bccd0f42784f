import numpy as np
import pytest

from rmtlab.ensembles import (EnsembleSpec, InfeasibleMomentsError, construct_matched_pair,
                              sample_matrix, three_point_from_moments)
from rmtlab.numkernel import DomainError


@pytest.mark.parametrize("family,m4", [("gaussian", 3.0), ("rademacher", 1.0), ("uniform", 1.8)])
def test_entry_moments(family, m4):
    A = sample_matrix(EnsembleSpec(family, 300, seed=1)) * np.sqrt(300)
    assert abs(A.mean()) < 0.02
    assert abs((A ** 2).mean() - 1) < 0.02
    assert abs((A ** 4).mean() - m4) < 0.1


def test_complex_ginibre_variance():
    A = sample_matrix(EnsembleSpec("complexGinibre", 200, seed=2))
    assert np.iscomplexobj(A)
    assert abs(np.mean(np.abs(A) ** 2) * 200 - 1) < 0.02
    assert abs(np.mean(A ** 2) * 200) < 0.02


def test_seed_determinism():
    s = EnsembleSpec("gaussian", 10, seed=4)
    assert np.array_equal(sample_matrix(s), sample_matrix(s))
    assert not np.array_equal(sample_matrix(s), sample_matrix(s.with_seed(5)))


def test_spec_round_trip():
    s = EnsembleSpec("custom", 5, seed=3, variance=0.5, customMoments=(0, 1, 0.2, 2.0))
    assert EnsembleSpec.from_dict(s.to_dict()) == s
    with pytest.raises(DomainError):
        EnsembleSpec.from_dict({**s.to_dict(), "bogus": 1})
    with pytest.raises(DomainError):
        EnsembleSpec("cauchy", 3)


def test_three_point_law_hits_moments():
    law = three_point_from_moments(1.0, 0.4, 2.5)
    assert [law.moment(k) for k in (1, 2, 3, 4)] == pytest.approx([0, 1.0, 0.4, 2.5])
    with pytest.raises(InfeasibleMomentsError):
        three_point_from_moments(1.0, 0.0, 0.5)


def test_matched_pair_moments():
    target = EnsembleSpec("rademacher", 400)
    pair = construct_matched_pair(target, 0.1)
    left, tgt = pair.achievedMoments["left"], pair.achievedMoments["target"]
    for k in (1, 2, 3):
        assert left[k] == pytest.approx(tgt[k], abs=1e-15)
    assert abs(pair.fourthMomentGap) <= 400 ** (-2.1)


def test_matched_pair_gaussian_target():
    pair = construct_matched_pair(EnsembleSpec("gaussian", 100), 0.2)
    assert pair.law == "gaussian"
    assert pair.fourthMomentGap == pytest.approx(0, abs=1e-18)
    pair3 = construct_matched_pair(EnsembleSpec("gaussian", 100), 0.2, prefer_gaussian=False)
    assert pair3.law == "three_point"
