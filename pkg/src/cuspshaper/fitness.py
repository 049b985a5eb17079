"""Fitness of a candidate shaper against a stored reference output.

Lower is better; zero means a perfect match under the chosen criterion.
"""

from __future__ import annotations

import enum

import numpy as np

from .shaper import DEFAULT_POLICY, ArithmeticPolicy, ShaperParams, shape_batch

# Assigned to shapers that overflow the accumulator so the GA can keep going.
WORST_FITNESS = int(np.iinfo(np.int64).max)


class FitnessKind(str, enum.Enum):
    F1 = "f1"
    F2 = "f2"
    F3 = "f3"

    @classmethod
    def parse(cls, text) -> "FitnessKind":
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ValueError(f"fitness must be one of f1, f2, f3; got {text!r}") from None


def _pair(s, s_ref):
    s, s_ref = np.asarray(s), np.asarray(s_ref)
    if s.shape[-1] != s_ref.shape[-1]:
        raise ValueError(f"length mismatch: {s.shape[-1]} vs {s_ref.shape[-1]}")
    return s, s_ref


def f1(s, s_ref):
    """Absolute difference of the peak heights."""
    s, s_ref = _pair(s, s_ref)
    return abs(s.max(axis=-1) - s_ref.max())


def f2(s, s_ref):
    """Cumulative absolute error, sample by sample."""
    s, s_ref = _pair(s, s_ref)
    return np.abs(s - s_ref).sum(axis=-1)


def f3(s, s_ref):
    return f1(s, s_ref) + f2(s, s_ref)


FITNESS_FUNCTIONS = {FitnessKind.F1: f1, FitnessKind.F2: f2, FitnessKind.F3: f3}


class ShaperFitness:
    """Scores shaper parameters on a fixed input against a reference output.

    Calling the object scores one ``ShaperParams``; ``evaluate_batch`` scores a
    whole decoded population and is what ``ga.evolve`` uses when present.
    Overflowing shapers score ``WORST_FITNESS``.
    """

    def __init__(self, v, s_ref, kind=FitnessKind.F2, policy: ArithmeticPolicy = DEFAULT_POLICY):
        self.v = np.asarray(v)
        self.s_ref = np.asarray(s_ref)
        if self.v.shape != self.s_ref.shape:
            raise ValueError(f"length mismatch: {self.v.size} vs {self.s_ref.size}")
        self.kind = FitnessKind.parse(kind.value if isinstance(kind, FitnessKind) else kind)
        self.policy = policy
        self._fn = FITNESS_FUNCTIONS[self.kind]

    def evaluate_batch(self, k, l, m1, m2) -> np.ndarray:  # noqa: E741
        s, overflowed = shape_batch(self.v, k, l, m1, m2, self.policy)
        if self.policy.overflow_mode == "trap":
            s = np.where(overflowed[:, None], 0, s).astype(np.int64)
        scores = np.asarray(self._fn(s, self.s_ref), dtype=np.int64)
        if self.policy.overflow_mode == "trap":
            scores = np.where(overflowed, WORST_FITNESS, scores)
        return scores

    def __call__(self, params: ShaperParams) -> int:
        return int(self.evaluate_batch([params.k], [params.l], [params.m1], [params.m2])[0])


def evaluate(params: ShaperParams, v, s_ref, kind=FitnessKind.F2, policy=DEFAULT_POLICY) -> int:
    """Shape ``v`` with ``params`` and score it against ``s_ref``."""
    return ShaperFitness(v, s_ref, kind, policy)(params)
