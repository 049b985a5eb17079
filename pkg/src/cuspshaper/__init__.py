"""Evolvable cusp-like pulse shaper: fixed-point emulation, fitness
functions, genetic recalibration and experiment harness."""

from .fitness import FitnessKind, ShaperFitness, evaluate, f1, f2, f3
from .ga import EvolutionResult, GaConfig, decode, encode, evolve
from .shaper import (
    ArithmeticPolicy,
    ShaperOverflowError,
    ShaperParams,
    ShaperState,
    Waveform,
    gain_ratio,
    k_from_l,
    peak,
    shape,
    shape_oracle,
    step,
    to_bus,
)
from .signals import DegradationSpec, PulseSpec, degrade, gen_exponential

__all__ = [
    "ArithmeticPolicy",
    "DegradationSpec",
    "EvolutionResult",
    "FitnessKind",
    "GaConfig",
    "PulseSpec",
    "ShaperFitness",
    "ShaperOverflowError",
    "ShaperParams",
    "ShaperState",
    "Waveform",
    "decode",
    "degrade",
    "encode",
    "evaluate",
    "evolve",
    "f1",
    "f2",
    "f3",
    "gain_ratio",
    "gen_exponential",
    "k_from_l",
    "peak",
    "shape",
    "shape_oracle",
    "step",
    "to_bus",
]
