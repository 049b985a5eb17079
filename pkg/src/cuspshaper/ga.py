"""Generational genetic algorithm over 40-bit shaper chromosomes.

Chromosome layout, most significant field first, each field MSB-first::

    bits  0..5   k   (6-bit unsigned)
    bits  6..11  l   (6-bit unsigned)
    bits 12..25  m1  (14-bit two's complement)
    bits 26..39  m2  (14-bit two's complement)
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .shaper import DELAY_BITS, GAIN_BITS, ShaperParams

FIELD_WIDTHS = (DELAY_BITS, DELAY_BITS, GAIN_BITS, GAIN_BITS)
CHROMOSOME_BITS = sum(FIELD_WIDTHS)
_OFFSETS = np.cumsum((0,) + FIELD_WIDTHS)
_SIGNED = (False, False, True, True)


def _field_weights() -> np.ndarray:
    """(40, 4) matrix turning a bit vector into the four unsigned field values."""
    w = np.zeros((CHROMOSOME_BITS, 4), dtype=np.int64)
    for j, width in enumerate(FIELD_WIDTHS):
        start = _OFFSETS[j]
        w[start:start + width, j] = 1 << np.arange(width - 1, -1, -1)
    return w


_WEIGHTS = _field_weights()


def encode(params: ShaperParams) -> np.ndarray:
    bits = np.zeros(CHROMOSOME_BITS, dtype=np.uint8)
    for j, (value, width) in enumerate(zip(params.as_tuple(), FIELD_WIDTHS)):
        raw = value & ((1 << width) - 1)
        start = _OFFSETS[j]
        for i in range(width):
            bits[start + i] = (raw >> (width - 1 - i)) & 1
    return bits


def decode_fields(pop: np.ndarray) -> tuple[np.ndarray, ...]:
    """Vectorised decode of a (P, 40) bit array into k, l, m1, m2 arrays."""
    raw = np.asarray(pop, dtype=np.int64) @ _WEIGHTS
    fields = []
    for j, (width, signed) in enumerate(zip(FIELD_WIDTHS, _SIGNED)):
        col = raw[:, j]
        if signed:
            col = np.where(col >= 1 << (width - 1), col - (1 << width), col)
        fields.append(col)
    return tuple(fields)


def decode(bits) -> ShaperParams:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (CHROMOSOME_BITS,) or np.any(bits > 1):
        raise ValueError(f"chromosome must be {CHROMOSOME_BITS} bits")
    k, l, m1, m2 = (int(f[0]) for f in decode_fields(bits[None, :]))
    return ShaperParams(k, l, m1, m2)


def to_string(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def from_string(text: str) -> np.ndarray:
    text = text.replace(" ", "")
    if len(text) != CHROMOSOME_BITS or set(text) - {"0", "1"}:
        raise ValueError(f"chromosome must be {CHROMOSOME_BITS} binary digits")
    return np.fromiter((int(c) for c in text), dtype=np.uint8)


def _as_int(pop: np.ndarray) -> np.ndarray:
    """40-bit integer value of each row; integer order equals lexicographic order."""
    weights = (1 << np.arange(CHROMOSOME_BITS - 1, -1, -1, dtype=np.int64))
    return pop.astype(np.int64) @ weights


# -- operators ---------------------------------------------------------------
# The scalar operators below draw from ``rng`` exactly as ``evolve`` does in
# its vectorised loop; the ``*_with`` helpers hold the shared logic.


def _tournament_with(fitness, first, second):
    return np.where(fitness[second] < fitness[first], second, first)


def tournament_select(pop, fitnesses, rng: np.random.Generator):
    """Binary tournament with replacement; ties go to the first draw."""
    fitnesses = np.asarray(fitnesses)
    if len(fitnesses) == 0:
        raise ValueError("empty population")
    first, second = rng.integers(0, len(fitnesses), size=2)
    return pop[int(_tournament_with(fitnesses, first, second))]


def _crossover_with(a, b, cut):
    """Swap suffixes from ``cut``; ``a``/``b`` are (..., 40), ``cut`` broadcasts."""
    keep = np.arange(CHROMOSOME_BITS) < np.asarray(cut)[..., None]
    return np.where(keep, a, b), np.where(keep, b, a)


def one_point_crossover(a, b, rng: np.random.Generator):
    cut = int(rng.integers(1, CHROMOSOME_BITS))
    c1, c2 = _crossover_with(np.asarray(a), np.asarray(b), cut)
    return c1.astype(np.uint8), c2.astype(np.uint8)


def _mutate_with(children, do_flip, positions):
    out = children.copy()
    rows = np.nonzero(do_flip)[0]
    out[rows, positions[rows]] ^= 1
    return out


def mutate(c, mutation_prob: float, rng: np.random.Generator):
    """Flip one uniformly chosen bit with probability ``mutation_prob``."""
    do_flip = rng.random(1) < mutation_prob
    position = rng.integers(0, CHROMOSOME_BITS, size=1)
    return _mutate_with(np.asarray(c, dtype=np.uint8)[None, :], do_flip, position)[0]


# -- evolution ---------------------------------------------------------------


@dataclass
class GaConfig:
    population_size: int = 125
    elite_count: int = 4
    mutation_prob: float = 0.5
    max_generations: int = 20000
    target_fitness: float = 0
    seed: int = 0
    # Stop once the best fitness has not improved for this many generations.
    # None disables the rule; calibrations that cannot reach the target use it.
    stall_generations: Optional[int] = None

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must be in [0, population_size)")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must be in [0, 1]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.stall_generations is not None and self.stall_generations < 1:
            raise ValueError("stall_generations must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "GaConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown GA config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "GaConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "GaConfig":
        return GaConfig(**{**asdict(self), **changes})


@dataclass
class EvolutionResult:
    best_params: ShaperParams
    best_fitness: float
    generations: int
    evaluations: int
    wall_time: float
    fitness_trace: list = field(default_factory=list)
    seed: int = 0
    converged: bool = False
    best_chromosome: str = ""
    population_sizes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["best_params"] = str(self.best_params)
        del d["population_sizes"]
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _evaluate(pop, eval_fn, executor):
    batch = getattr(eval_fn, "evaluate_batch", None)
    if batch is not None:
        return np.asarray(batch(*decode_fields(pop)))
    params = [decode(row) for row in pop]
    if executor is not None:
        return np.asarray(list(executor.map(eval_fn, params)))
    return np.asarray([eval_fn(p) for p in params])


def evolve(
    config: GaConfig,
    eval_fn: Callable[[ShaperParams], float],
    executor=None,
    initial=(),
) -> EvolutionResult:
    """Minimise ``eval_fn`` over the 40-bit parameter space.

    ``eval_fn`` maps ShaperParams to a nonnegative fitness (lower is better).
    If it exposes ``evaluate_batch(k, l, m1, m2)`` the whole population is
    scored in one call; otherwise individuals are scored one at a time,
    through ``executor.map`` when an executor is given. Selection, crossover
    and mutation draw from one RNG stream, so the trajectory does not depend
    on how evaluation is scheduled.

    ``initial`` lists ShaperParams that replace the first random individuals
    of generation 1, e.g. the currently deployed design when recalibrating.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    size, n_elite = config.population_size, config.elite_count
    n_children = size - n_elite
    n_pairs = (n_children + 1) // 2

    pop = rng.integers(0, 2, size=(size, CHROMOSOME_BITS), dtype=np.uint8)
    initial = list(initial)
    if len(initial) > size:
        raise ValueError("more initial individuals than population slots")
    for i, params in enumerate(initial):
        pop[i] = encode(params)
    trace = []
    sizes = []
    evaluations = 0
    best_so_far = None
    stalled = 0

    generation = 0
    while True:
        generation += 1
        fitness = _evaluate(pop, eval_fn, executor)
        evaluations += size
        sizes.append(len(pop))
        order = np.lexsort((_as_int(pop), fitness))
        best = fitness[order[0]].item()
        best_row = pop[order[0]].copy()
        trace.append(best)

        if best_so_far is None or best < best_so_far:
            best_so_far, stalled = best, 0
        else:
            stalled += 1
        if best <= config.target_fitness or generation >= config.max_generations:
            break
        if config.stall_generations is not None and stalled >= config.stall_generations:
            break

        elite = pop[order[:n_elite]]
        draws = rng.integers(0, size, size=(n_pairs, 2, 2))
        parents = _tournament_with(fitness, draws[..., 0], draws[..., 1])
        cuts = rng.integers(1, CHROMOSOME_BITS, size=n_pairs)
        c1, c2 = _crossover_with(pop[parents[:, 0]], pop[parents[:, 1]], cuts)
        # Interleave so that dropping the last child discards a second child.
        children = np.stack([c1, c2], axis=1).reshape(2 * n_pairs, CHROMOSOME_BITS)
        do_flip = rng.random(2 * n_pairs) < config.mutation_prob
        positions = rng.integers(0, CHROMOSOME_BITS, size=2 * n_pairs)
        children = _mutate_with(children, do_flip, positions)[:n_children]
        pop = np.concatenate([elite, children.astype(np.uint8)])

    return EvolutionResult(
        best_params=decode(best_row),
        best_fitness=best,
        generations=generation,
        evaluations=evaluations,
        wall_time=time.perf_counter() - start,
        fitness_trace=trace,
        seed=config.seed,
        converged=best <= config.target_fitness,
        best_chromosome=to_string(best_row),
        population_sizes=sizes,
    )
