"""Fixed-point emulation of the configurable cusp-like pulse shaper.

The datapath is four recurrences driven by two delay pipelines::

    dk(n) = v(n) - v(n-k)
    d1(n) = v(n) - v(n-1)
    p(n)  = p(n-1) + dk(n) - k * d1(n-l)
    q(n)  = q(n-1) + m2 * p(n)
    s(n)  = s(n-1) + q(n) + m1 * p(n)

with every signal zero for n < 0. Inputs are signed 14-bit bus samples and
all arithmetic is integer, so the emulation is exact as long as no
intermediate leaves the accumulator width selected by ``ArithmeticPolicy``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

INPUT_BITS = 14
INPUT_MIN = -(1 << (INPUT_BITS - 1))
INPUT_MAX = (1 << (INPUT_BITS - 1)) - 1

DELAY_BITS = 6
DELAY_MAX = (1 << DELAY_BITS) - 1
GAIN_BITS = 14
GAIN_MIN = -(1 << (GAIN_BITS - 1))
GAIN_MAX = (1 << (GAIN_BITS - 1)) - 1

OVERFLOW_MODES = ("trap", "saturate", "wrap")

# Widest accumulator for which every product m * p still fits in int64.
_INT64_SAFE_BITS = 63 - GAIN_BITS


class ShaperOverflowError(ArithmeticError):
    """An intermediate value left the accumulator range under ``trap``."""


@dataclass(frozen=True)
class ShaperParams:
    """The four reconfigurable shaper parameters (k, l, m1, m2)."""

    k: int
    l: int  # noqa: E741
    m1: int
    m2: int

    def __post_init__(self):
        for name in ("k", "l"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value <= DELAY_MAX:
                raise ValueError(f"{name} out of range [0, {DELAY_MAX}]: {value!r}")
        for name in ("m1", "m2"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not GAIN_MIN <= value <= GAIN_MAX:
                raise ValueError(f"{name} out of range [{GAIN_MIN}, {GAIN_MAX}]: {value!r}")
        for name in ("k", "l", "m1", "m2"):
            object.__setattr__(self, name, int(getattr(self, name)))

    @classmethod
    def parse(cls, text: str) -> "ShaperParams":
        """Parse the ``k,l,m1,m2`` literal used on the command line and in JSON."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected 'k,l,m1,m2', got {text!r}")
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"parameters must be integers: {text!r}") from None
        return cls(*values)

    def __str__(self) -> str:
        return f"{self.k},{self.l},{self.m1},{self.m2}"

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.k, self.l, self.m1, self.m2)


@dataclass(frozen=True)
class ArithmeticPolicy:
    accumulator_bits: int = 48
    overflow_mode: str = "trap"

    def __post_init__(self):
        if self.accumulator_bits < 40:
            raise ValueError("accumulator_bits must be >= 40")
        if self.overflow_mode not in OVERFLOW_MODES:
            raise ValueError(f"overflow_mode must be one of {OVERFLOW_MODES}")

    @property
    def lo(self) -> int:
        return -(1 << (self.accumulator_bits - 1))

    @property
    def hi(self) -> int:
        return (1 << (self.accumulator_bits - 1)) - 1

    def apply(self, x: int) -> int:
        """Bring one intermediate back into the accumulator range."""
        if self.lo <= x <= self.hi:
            return x
        if self.overflow_mode == "trap":
            raise ShaperOverflowError(
                f"value {x} exceeds {self.accumulator_bits}-bit accumulator"
            )
        if self.overflow_mode == "saturate":
            return self.hi if x > self.hi else self.lo
        return _wrap_int(x, self.accumulator_bits)


DEFAULT_POLICY = ArithmeticPolicy()


def _wrap_int(x: int, bits: int) -> int:
    mask = (1 << bits) - 1
    x &= mask
    return x - (1 << bits) if x >> (bits - 1) else x


@dataclass(frozen=True)
class Waveform:
    """Sampled signal plus its sample period in seconds."""

    samples: np.ndarray
    sample_period: float = 20e-6

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("waveform needs at least one sample")
        object.__setattr__(self, "samples", samples)

    @property
    def is_integer(self) -> bool:
        return np.issubdtype(self.samples.dtype, np.integer)

    def __len__(self) -> int:
        return self.samples.size


def to_bus(volts, full_scale: float = 20.0) -> np.ndarray:
    """Quantise real samples onto the signed 14-bit input bus.

    ``full_scale`` volts maps to code 8191; codes outside the bus clip as an
    ADC would.
    """
    if full_scale <= 0:
        raise ValueError("full_scale must be positive")
    codes = np.rint(np.asarray(volts, dtype=float) / full_scale * INPUT_MAX)
    return np.clip(codes, INPUT_MIN, INPUT_MAX).astype(np.int64)


def from_bus(codes, full_scale: float = 20.0) -> np.ndarray:
    return np.asarray(codes, dtype=float) * (full_scale / INPUT_MAX)


def _check_input(v) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("input waveform must be a non-empty 1-D sequence")
    if not np.issubdtype(v.dtype, np.integer):
        if not np.all(np.isfinite(v)) or not np.all(v == np.rint(v)):
            raise ValueError("integer-mode input must hold integer samples")
        v = v.astype(np.int64)
    if v.min() < INPUT_MIN or v.max() > INPUT_MAX:
        raise ValueError(f"input samples must fit the signed {INPUT_BITS}-bit bus")
    return v.astype(np.int64)


def _delayed(x: np.ndarray, delay: np.ndarray) -> np.ndarray:
    """Row-wise ``x(n - delay)`` with zero fill; ``x`` is 1-D or (P, N)."""
    n = x.shape[-1]
    idx = np.arange(n)[None, :] - delay[:, None]
    valid = idx >= 0
    idx = np.where(valid, idx, 0)
    if x.ndim == 1:
        out = x[idx]
    else:
        out = np.take_along_axis(x, idx, axis=1)
    return np.where(valid, out, 0)


def shape_batch(v, k, l, m1, m2, policy: ArithmeticPolicy = DEFAULT_POLICY):  # noqa: E741
    """Shape one input with P parameter sets at once.

    ``k``, ``l``, ``m1`` and ``m2`` are length-P integer arrays. Returns
    ``(s, overflowed)`` where ``s`` has shape (P, N) and ``overflowed`` flags
    rows that left the accumulator range. Under ``trap`` the overflowing rows
    of ``s`` are meaningless; under ``wrap`` and ``saturate`` every row is
    valid.

    The trap and wrap paths use cumulative sums. For wrap this is exact
    because two's-complement wrapping commutes with +, - and *. For trap the
    first out-of-range value in each stage is always computed exactly (all
    earlier values are in range and int64 has headroom for one more step),
    so range detection is exact too.
    """
    v = _check_input(v)
    k, l, m1, m2 = (np.atleast_1d(np.asarray(a, dtype=np.int64)) for a in (k, l, m1, m2))
    if policy.overflow_mode == "saturate":
        rows = []
        flags = []
        for kk, ll, a, b in zip(k, l, m1, m2):
            s, hit = _shape_sequential(v, ShaperParams(int(kk), int(ll), int(a), int(b)), policy)
            rows.append(s)
            flags.append(hit)
        return np.array(rows, dtype=np.int64), np.array(flags, dtype=bool)

    exact = policy.accumulator_bits <= _INT64_SAFE_BITS or policy.overflow_mode == "wrap"
    dtype = np.int64 if exact else object
    vv = v.astype(dtype)
    d1 = vv - _delayed(vv, np.ones(1, dtype=np.int64))[0]
    dk = vv[None, :] - _delayed(vv, k)
    kd1 = k[:, None].astype(dtype) * _delayed(d1, l)

    with np.errstate(over="ignore"):
        p = np.cumsum(dk - kd1, axis=1)
        m2p = m2[:, None].astype(dtype) * p
        q = np.cumsum(m2p, axis=1)
        m1p = m1[:, None].astype(dtype) * p
        inc = q + m1p
        s = np.cumsum(inc, axis=1)

    if policy.overflow_mode == "wrap":
        return _wrap_array(s, policy.accumulator_bits), np.zeros(len(k), dtype=bool)

    lo, hi = policy.lo, policy.hi
    overflowed = np.zeros(len(k), dtype=bool)
    for stage in (dk, kd1, p, m2p, q, m1p, inc, s):
        overflowed |= np.any((stage < lo) | (stage > hi), axis=1)
    return s.astype(np.int64) if dtype is np.int64 else s, overflowed


def _wrap_array(x: np.ndarray, bits: int) -> np.ndarray:
    x = x.astype(np.int64)
    if bits >= 64:
        return x
    u = x.view(np.uint64) & np.uint64((1 << bits) - 1)
    sign = np.uint64(1 << (bits - 1))
    return (u ^ sign).astype(np.int64) - np.int64(1 << (bits - 1))


def shape(v, params: ShaperParams, policy: ArithmeticPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Run the shaper over integer bus samples ``v`` and return ``s``.

    Raises ``ShaperOverflowError`` under the ``trap`` policy when any
    intermediate leaves the accumulator range.
    """
    s, overflowed = shape_batch(
        v, [params.k], [params.l], [params.m1], [params.m2], policy
    )
    if overflowed[0] and policy.overflow_mode == "trap":
        raise ShaperOverflowError(
            f"shaper {params} overflows the {policy.accumulator_bits}-bit accumulator"
        )
    return s[0]


def shape_oracle(v: Sequence, params: ShaperParams) -> list:
    """Direct evaluation of the recurrences with unbounded arithmetic.

    Works on any numeric type (``int``, ``float``, ``Fraction``); integer
    inputs give exact integer outputs. Kept deliberately naive: it indexes
    the input history rather than using delay lines or prefix sums.
    """
    v = [x.item() if isinstance(x, np.generic) else x for x in v]
    k, l, m1, m2 = params.as_tuple()

    def at(seq, i):
        return seq[i] if i >= 0 else 0

    d1 = []
    p, q, s = [], [], []
    for n in range(len(v)):
        dk_n = v[n] - at(v, n - k)
        d1.append(v[n] - at(v, n - 1))
        p.append(at(p, n - 1) + dk_n - k * at(d1, n - l))
        q.append(at(q, n - 1) + m2 * p[n])
        s.append(at(s, n - 1) + q[n] + m1 * p[n])
    return s


@dataclass(frozen=True)
class ShaperState:
    """Registers of the streaming shaper.

    ``delay_k`` holds the last k inputs (oldest first), ``delay_l`` the last l
    values of d1, ``prev_v`` the one-sample input register.
    """

    delay_k: tuple = ()
    delay_l: tuple = ()
    prev_v: int = 0
    acc_p: int = 0
    acc_q: int = 0
    acc_s: int = 0

    @classmethod
    def reset(cls, params: ShaperParams) -> "ShaperState":
        return cls(delay_k=(0,) * params.k, delay_l=(0,) * params.l)


def step(
    state: ShaperState,
    v_n: int,
    params: ShaperParams,
    policy: ArithmeticPolicy = DEFAULT_POLICY,
) -> tuple[ShaperState, int]:
    """Advance the shaper by one sample; returns the new state and s(n)."""
    if len(state.delay_k) != params.k or len(state.delay_l) != params.l:
        raise ValueError("state delay lines do not match params")
    v_n = int(v_n)
    if not INPUT_MIN <= v_n <= INPUT_MAX:
        raise ValueError(f"input sample {v_n} outside the {INPUT_BITS}-bit bus")
    fix = policy.apply

    v_old = state.delay_k[0] if params.k else v_n
    dk = fix(v_n - v_old)
    d1 = v_n - state.prev_v
    d1_l = state.delay_l[0] if params.l else d1
    p = fix(state.acc_p + dk - fix(params.k * d1_l))
    q = fix(state.acc_q + fix(params.m2 * p))
    s = fix(state.acc_s + fix(q + fix(params.m1 * p)))

    new = ShaperState(
        delay_k=(state.delay_k[1:] + (v_n,)) if params.k else (),
        delay_l=(state.delay_l[1:] + (d1,)) if params.l else (),
        prev_v=v_n,
        acc_p=p,
        acc_q=q,
        acc_s=s,
    )
    return new, s


def _shape_sequential(v, params: ShaperParams, policy: ArithmeticPolicy):
    """Fold ``step`` over ``v``; reports whether any value was clamped."""
    probe = ArithmeticPolicy(policy.accumulator_bits, "trap")
    state = ShaperState.reset(params)
    out = []
    hit = False
    for x in v:
        if not hit:
            try:
                _, _ = step(state, x, params, probe)
            except ShaperOverflowError:
                hit = True
        state, s = step(state, x, params, policy)
        out.append(s)
    return np.array(out, dtype=np.int64), hit


def gain_ratio(tau: float, t_clk: float) -> float:
    """Ideal m1/m2 for an exponential of decay constant ``tau`` sampled every ``t_clk``."""
    if not (tau > 0 and t_clk > 0):
        raise ValueError("tau and t_clk must be positive")
    return 1.0 / math.expm1(t_clk / tau)


def k_from_l(l: int) -> int:  # noqa: E741
    """Matched coefficient k = 2l + 1 for a symmetric cusp."""
    k = 2 * int(l) + 1
    if l < 0 or k > DELAY_MAX:
        raise ValueError(f"l={l} gives k={k}, outside [1, {DELAY_MAX}]")
    return k


def peak(s) -> tuple[int, float]:
    """Index of the first maximum and the maximum itself."""
    s = np.asarray(s)
    if s.size == 0:
        raise ValueError("peak of an empty waveform")
    i = int(np.argmax(s))
    return i, s[i].item()
