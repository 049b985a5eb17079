"""Synthetic detector pulses, sensor degradation and noise generators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PulseSpec:
    """Exponential preamplifier pulse ``A * exp(-(n - n0) * t_clk / tau)``."""

    amplitude: float = 20.0
    tau: float = 200e-6
    t_clk: float = 20e-6
    n_samples: int = 72
    onset: int = 0

    def __post_init__(self):
        if not self.tau > 0 or not self.t_clk > 0:
            raise ValueError("tau and t_clk must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0 <= self.onset < self.n_samples:
            raise ValueError("onset must lie inside the window")

    def replace(self, **changes) -> "PulseSpec":
        return PulseSpec(**{**self.__dict__, **changes})


@dataclass(frozen=True)
class DegradationSpec:
    """Attenuation ``delta`` plus serial (white) and parallel (1/f^2) noise."""

    delta: float = 1.0
    serial_sigma: float = 0.0
    parallel_amp: float = 0.0
    threshold: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.serial_sigma < 0 or self.parallel_amp < 0:
            raise ValueError("noise amplitudes must be nonnegative")

    @classmethod
    def with_default_noise(cls, delta: float, amplitude: float, **kwargs) -> "DegradationSpec":
        """Noise scaled to the pulse amplitude: 1 % serial, 0.5 % parallel."""
        return cls(delta=delta, serial_sigma=0.01 * amplitude,
                   parallel_amp=0.005 * amplitude, **kwargs)


def gen_exponential(spec: PulseSpec) -> np.ndarray:
    n = np.arange(spec.n_samples)
    t = (n - spec.onset) * spec.t_clk
    return np.where(n >= spec.onset, spec.amplitude * np.exp(-t / spec.tau), 0.0)


def gen_white_noise(n: int, sigma: float, seed) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return np.zeros(n)
    return np.random.default_rng(seed).normal(0.0, sigma, size=n)


def gen_one_over_f2_noise(n: int, rms: float, seed) -> np.ndarray:
    """Brownian (random-walk) noise, mean removed and scaled to ``rms``."""
    if rms < 0:
        raise ValueError("rms must be nonnegative")
    if rms == 0:
        return np.zeros(n)
    walk = np.cumsum(np.random.default_rng(seed).normal(size=n))
    walk -= walk.mean()
    power = math.sqrt(np.mean(walk ** 2))
    if power == 0:
        return np.zeros(n)
    return walk * (rms / power)


def degrade(v, spec: DegradationSpec) -> np.ndarray:
    """Attenuate and add noise to the samples above ``spec.threshold``.

    Gated samples become ``delta * v + (1 - delta) + serial + parallel``; the
    rest pass through untouched. Both noise sequences are drawn over the full
    window from independent streams derived from ``spec.seed``.
    """
    v = np.asarray(v, dtype=float)
    serial_seed, parallel_seed = np.random.SeedSequence(spec.seed).spawn(2)
    serial = gen_white_noise(v.size, spec.serial_sigma, serial_seed)
    parallel = gen_one_over_f2_noise(v.size, spec.parallel_amp, parallel_seed)
    gated = v > spec.threshold
    out = v.copy()
    out[gated] = spec.delta * v[gated] + (1 - spec.delta) + serial[gated] + parallel[gated]
    return out
