import numpy as np
import pytest

from cuspshaper.fitness import WORST_FITNESS, FitnessKind, ShaperFitness, evaluate, f1, f2, f3
from cuspshaper.shaper import ArithmeticPolicy, ShaperParams, shape, to_bus

REF = ShaperParams(63, 31, 19, 2)


def reference():
    v = to_bus(20 * np.exp(-np.arange(72) * 0.1))
    return v, shape(v, REF)


def test_identity_scores_zero():
    v, s = reference()
    for kind in FitnessKind:
        assert evaluate(REF, v, s, kind) == 0


def test_shifted_peak_only_f1_blind():
    s_ref = np.array([0, 1, 5, 9, 5, 1, 0, 0, 0, 0])
    s = np.roll(s_ref, 3)
    assert f1(s, s_ref) == 0
    assert f2(s, s_ref) > 0
    assert f3(s, s_ref) == f2(s, s_ref)


def test_values():
    assert f1([1, 4, 2], [0, 2, 0]) == 2
    assert f2([1, 4, 2], [0, 2, 0]) == 5
    assert f3([1, 4, 2], [0, 2, 0]) == 7


def test_batch_rows():
    s_ref = np.array([0, 2, 0])
    batch = np.array([[1, 4, 2], [0, 2, 0]])
    assert f2(batch, s_ref).tolist() == [5, 0]


def test_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        f2([1, 2], [1, 2, 3])
    with pytest.raises(ValueError, match="length mismatch"):
        ShaperFitness([0, 1], [0, 1, 2])


def test_overflow_scores_worst():
    v = np.full(2000, 8191)
    fit = ShaperFitness(v, np.zeros(2000, dtype=np.int64))
    assert fit(ShaperParams(63, 0, 8191, 8191)) == WORST_FITNESS
    assert fit(ShaperParams(0, 0, 0, 0)) == 0


def test_wrap_policy_scores_wrapped_output():
    v = np.full(2000, 8191)
    fit = ShaperFitness(v, np.zeros(2000, dtype=np.int64), policy=ArithmeticPolicy(48, "wrap"))
    assert 0 < fit(ShaperParams(63, 0, 8191, 8191)) < WORST_FITNESS


def test_batch_matches_scalar():
    v, s = reference()
    fit = ShaperFitness(v, s, "f3")
    ps = [ShaperParams(63, 31, 19, 1), ShaperParams(20, 3, 100, -5), REF]
    batch = fit.evaluate_batch(*zip(*(p.as_tuple() for p in ps)))
    assert batch.tolist() == [fit(p) for p in ps]


def test_kind_parse():
    assert FitnessKind.parse("F2") is FitnessKind.F2
    with pytest.raises(ValueError):
        FitnessKind.parse("f4")
