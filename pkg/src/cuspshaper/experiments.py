"""Experiment harness: scratch convergence, degeneration recovery, A/tau
sweeps and pulse-height histograms."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import ga
from .fitness import FitnessKind, ShaperFitness
from .shaper import (
    DEFAULT_POLICY,
    INPUT_MAX,
    ArithmeticPolicy,
    ShaperParams,
    peak,
    shape,
    to_bus,
)
from .signals import DegradationSpec, PulseSpec, degrade, gen_exponential

SYNTHETIC_REFERENCE = ShaperParams(63, 31, 19, 2)
SYNTHETIC_PULSE = PulseSpec(amplitude=20.0, tau=200e-6, t_clk=20e-6, n_samples=72, onset=0)
EVENT_REFERENCE = ShaperParams(31, 15, 57, 13)

# Recalibration cannot reach fitness 0, so it stops on stagnation.
RECALIBRATION_GA = ga.GaConfig(max_generations=20000, stall_generations=300)


def derive_seeds(master: int, count: int) -> list[int]:
    """Independent per-run seeds from one master seed."""
    state = np.random.SeedSequence(master).generate_state(count, dtype=np.uint32)
    return [int(s) for s in state]


def summarize(values) -> dict:
    values = np.asarray(values, dtype=float)
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    return {
        "min": float(values.min()),
        "max": float(values.max()),
        "mean": float(values.mean()),
        "q1": float(q1),
        "median": float(median),
        "q3": float(q3),
    }


def rescale_fitness(value: float, full_scale: float) -> float:
    """Express a bus-unit fitness in input volts."""
    return float(value) * full_scale / INPUT_MAX


# -- scratch convergence -----------------------------------------------------


@dataclass
class ConvergenceStats:
    runs: int
    successes: int
    generations: dict
    wall_time: dict
    per_run: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _scratch_run(args):
    v, s_ref, kind, policy, config = args
    return ga.evolve(config, ShaperFitness(v, s_ref, kind, policy))


def run_scratch(
    runs: int,
    reference: ShaperParams = SYNTHETIC_REFERENCE,
    pulse: PulseSpec = SYNTHETIC_PULSE,
    ga_config: ga.GaConfig = ga.GaConfig(),
    kind=FitnessKind.F2,
    full_scale: float = 20.0,
    seed: Optional[int] = None,
    policy: ArithmeticPolicy = DEFAULT_POLICY,
    workers: int = 1,
):
    """Evolve from random populations towards the reference shaper's output.

    Each run gets its own seed, derived from ``seed`` (default: the GA config
    seed). With ``runs == 1`` that seed is used unchanged. Returns the
    aggregated ``ConvergenceStats`` and the individual ``EvolutionResult``s.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    master = ga_config.seed if seed is None else seed
    seeds = [master] if runs == 1 else derive_seeds(master, runs)
    v = to_bus(gen_exponential(pulse), full_scale)
    s_ref = shape(v, reference, policy)
    jobs = [(v, s_ref, kind, policy, ga_config.replace(seed=s)) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_scratch_run, jobs))
    else:
        results = [_scratch_run(job) for job in jobs]

    per_run = [
        {
            "seed": r.seed,
            "converged": r.converged,
            "generations": r.generations,
            "wall_time": r.wall_time,
            "best_fitness": r.best_fitness,
            "best_params": str(r.best_params),
        }
        for r in results
    ]
    summary = ConvergenceStats(
        runs=runs,
        successes=sum(r.converged for r in results),
        generations=summarize([r.generations for r in results]),
        wall_time=summarize([r.wall_time for r in results]),
        per_run=per_run,
    )
    return summary, results


# -- relative error and regression -------------------------------------------


def relative_error(s_restored, s_ref) -> float:
    """Signed peak error of ``s_restored`` against ``s_ref``, in percent."""
    _, ref_peak = peak(s_ref)
    if ref_peak == 0:
        raise ValueError("reference peak is zero")
    _, restored_peak = peak(s_restored)
    return 100.0 * (restored_peak - ref_peak) / ref_peak


@dataclass
class LinearFit:
    slope: float
    slope_ci: float  # half-width of the 95 % confidence interval
    intercept: float
    pearson_r: float
    p_value: float
    significant: bool


def linear_fit(xs, ys, alpha: float = 0.05) -> LinearFit:
    """OLS line with a t-based slope interval and a no-correlation test.

    ``pearson_r`` is defined as 0 when ``ys`` is constant.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = xs.size
    if n != ys.size:
        raise ValueError("xs and ys differ in length")
    if n < 3:
        raise ValueError("linear_fit needs at least 3 points")
    if np.ptp(xs) == 0:
        raise ValueError("xs has zero variance")
    t_crit = stats.t.ppf(1 - alpha / 2, n - 2)
    if np.ptp(ys) == 0:
        return LinearFit(0.0, 0.0, float(ys[0]), 0.0, 1.0, False)
    fit = stats.linregress(xs, ys)
    return LinearFit(
        slope=float(fit.slope),
        slope_ci=float(t_crit * fit.stderr),
        intercept=float(fit.intercept),
        pearson_r=float(fit.rvalue),
        p_value=float(fit.pvalue),
        significant=bool(fit.pvalue < alpha),
    )


# -- degeneration ------------------------------------------------------------


def synthetic_events(
    n_events: int,
    pulse: PulseSpec,
    spread: float = 0.03,
    seed: int = 0,
) -> list[np.ndarray]:
    """Stand-in event ensemble: exponential pulses with Gaussian amplitudes.

    Amplitudes are drawn from N(A, (spread * A)^2); tau and timing are fixed.
    Event 0 is kept at the nominal amplitude so it can serve as the
    calibration event.
    """
    rng = np.random.default_rng(seed)
    amplitudes = rng.normal(pulse.amplitude, spread * pulse.amplitude, size=n_events)
    amplitudes[0] = pulse.amplitude
    return [gen_exponential(pulse.replace(amplitude=float(a))) for a in amplitudes]


def event_pulse(reference: ShaperParams = EVENT_REFERENCE, amplitude=20.0,
                t_clk=20e-6, n_samples=128, onset=8) -> PulseSpec:
    """Pulse whose decay constant matches the gain ratio of ``reference``."""
    tau = t_clk / math.log1p(reference.m2 / reference.m1)
    return PulseSpec(amplitude=amplitude, tau=tau, t_clk=t_clk, n_samples=n_samples, onset=onset)


def degrade_events(events, deg: DegradationSpec) -> list[np.ndarray]:
    """Degrade every event with its own noise realisation."""
    seeds = derive_seeds(deg.seed, len(events))
    return [
        degrade(ev, DegradationSpec(deg.delta, deg.serial_sigma, deg.parallel_amp, deg.threshold, s))
        for ev, s in zip(events, seeds)
    ]


@dataclass
class DegenerationResult:
    reference: ShaperParams
    regenerated: ShaperParams
    fitness: int
    fitness_rescaled: float
    relative_error: float
    damaged_error: float
    evolution: ga.EvolutionResult
    v_original: np.ndarray
    v_degraded: np.ndarray
    s_reference: np.ndarray
    s_damaged: np.ndarray
    s_restored: np.ndarray
    degraded_events: list

    def summary(self) -> dict:
        return {
            "reference_params": str(self.reference),
            "regenerated_params": str(self.regenerated),
            "fitness": int(self.fitness),
            "fitness_rescaled": self.fitness_rescaled,
            "relative_error_percent": self.relative_error,
            "damaged_error_percent": self.damaged_error,
            "generations": self.evolution.generations,
            "wall_time": self.evolution.wall_time,
            "seed": self.evolution.seed,
        }


def run_degeneration(
    events: Sequence,
    deg: DegradationSpec,
    reference: ShaperParams = EVENT_REFERENCE,
    ga_config: ga.GaConfig = RECALIBRATION_GA,
    kind=FitnessKind.F2,
    full_scale: float = 25.0,
    calibration_index: int = 0,
    policy: ArithmeticPolicy = DEFAULT_POLICY,
) -> DegenerationResult:
    """Recalibrate the shaper after sensor degradation.

    The reference output is the reference shaper applied to the original
    calibration event. The GA starts from a population holding the deployed
    reference design and searches for parameters whose output on the
    degraded calibration event matches it.
    """
    if len(events) == 0:
        raise ValueError("empty event set")
    degraded = degrade_events(events, deg)
    v = to_bus(events[calibration_index], full_scale)
    v_deg = to_bus(degraded[calibration_index], full_scale)
    s_ref = shape(v, reference, policy)
    result = ga.evolve(ga_config, ShaperFitness(v_deg, s_ref, kind, policy), initial=[reference])
    s_damaged = shape(v_deg, reference, policy)
    s_restored = shape(v_deg, result.best_params, policy)
    return DegenerationResult(
        reference=reference,
        regenerated=result.best_params,
        fitness=int(result.best_fitness),
        fitness_rescaled=rescale_fitness(result.best_fitness, full_scale),
        relative_error=relative_error(s_restored, s_ref),
        damaged_error=relative_error(s_damaged, s_ref),
        evolution=result,
        v_original=np.asarray(events[calibration_index]),
        v_degraded=np.asarray(degraded[calibration_index]),
        s_reference=s_ref,
        s_damaged=s_damaged,
        s_restored=s_restored,
        degraded_events=degraded,
    )


# -- histograms --------------------------------------------------------------


@dataclass
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def mode_bin(self) -> int:
        return int(np.argmax(self.counts))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def event_peaks(events_bus, params: ShaperParams, policy=DEFAULT_POLICY) -> np.ndarray:
    return np.array([peak(shape(ev, params, policy))[1] for ev in events_bus], dtype=float)


def histogram_of_peaks(peaks, bins: int, value_range) -> Histogram:
    """Equal-width histogram; peaks outside the range land in the edge bins."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = value_range
    if not hi > lo:
        raise ValueError("histogram range must be increasing")
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.clip(np.searchsorted(edges, peaks, side="right") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return Histogram(edges, counts)


def build_histogram(events_bus, params: ShaperParams, bins: int = 128,
                    value_range=None, policy=DEFAULT_POLICY) -> Histogram:
    """Shape every event, take its peak height and bin the heights.

    The default range is [0, 1.2 * largest peak].
    """
    if len(events_bus) == 0:
        raise ValueError("empty event set")
    peaks = event_peaks(events_bus, params, policy)
    if value_range is None:
        top = peaks.max()
        value_range = (0.0, 1.2 * top if top > 0 else 1.0)
    return histogram_of_peaks(peaks, bins, value_range)


def restoration_histograms(
    events,
    degraded,
    reference: ShaperParams,
    regenerated: ShaperParams,
    bins: int = 128,
    full_scale: float = 25.0,
    policy=DEFAULT_POLICY,
) -> dict[str, Histogram]:
    """Original, damaged and restored peak histograms on a shared range."""
    original_bus = [to_bus(ev, full_scale) for ev in events]
    degraded_bus = [to_bus(ev, full_scale) for ev in degraded]
    original = event_peaks(original_bus, reference, policy)
    value_range = (0.0, 1.2 * original.max())
    return {
        "original": histogram_of_peaks(original, bins, value_range),
        "damaged": histogram_of_peaks(event_peaks(degraded_bus, reference, policy), bins, value_range),
        "restored": histogram_of_peaks(event_peaks(degraded_bus, regenerated, policy), bins, value_range),
    }


# -- sweep -------------------------------------------------------------------


def default_variations(points: int = 5, max_percent: float = 30.0) -> list[tuple[float, float]]:
    """Full grid of (amplitude %, tau %) changes, ``points`` per axis."""
    axis = np.linspace(-max_percent, max_percent, points)
    return [(float(a), float(t)) for a in axis for t in axis]


@dataclass
class SweepPoint:
    delta_amplitude: float  # percent
    delta_tau: float  # percent
    amplitude: float
    tau: float
    relative_error: float
    params: str
    fitness: int
    generations: int
    fitness_trace: list = field(default_factory=list, repr=False)


@dataclass
class SweepStats:
    points: list
    mean_error: float
    std_error: float
    max_abs_error: float
    fits: dict  # relation name -> LinearFit

    def to_dict(self) -> dict:
        d = asdict(self)
        for p in d["points"]:
            p.pop("fitness_trace", None)
        return d


def _fit_or_none(xs, ys):
    try:
        return linear_fit(xs, ys)
    except ValueError:
        return None


def run_sweep(
    variations: Sequence[tuple[float, float]] = None,
    reference: ShaperParams = SYNTHETIC_REFERENCE,
    pulse: PulseSpec = SYNTHETIC_PULSE,
    ga_config: ga.GaConfig = RECALIBRATION_GA,
    kind=FitnessKind.F2,
    full_scale: float = 26.0,
    seed: int = 0,
    policy: ArithmeticPolicy = DEFAULT_POLICY,
) -> SweepStats:
    """Recalibrate against amplitude and decay-time changes of the input.

    For every (dA %, dtau %) the modified pulse is quantised, the GA is
    started from the reference design, and the restored peak is compared to
    the reference output. Fits are reported for three relations: amplitude
    only (dtau = 0), tau only (dA = 0) and combined (dA = dtau).
    """
    if variations is None:
        variations = default_variations()
    v_ref = to_bus(gen_exponential(pulse), full_scale)
    s_ref = shape(v_ref, reference, policy)
    seeds = derive_seeds(seed, len(variations))
    points = []
    for (da, dt), run_seed in zip(variations, seeds):
        spec = pulse.replace(amplitude=pulse.amplitude * (1 + da / 100),
                             tau=pulse.tau * (1 + dt / 100))
        v = to_bus(gen_exponential(spec), full_scale)
        result = ga.evolve(ga_config.replace(seed=run_seed),
                           ShaperFitness(v, s_ref, kind, policy), initial=[reference])
        s = shape(v, result.best_params, policy)
        points.append(SweepPoint(
            delta_amplitude=da,
            delta_tau=dt,
            amplitude=spec.amplitude,
            tau=spec.tau,
            relative_error=relative_error(s, s_ref),
            params=str(result.best_params),
            fitness=int(result.best_fitness),
            generations=result.generations,
            fitness_trace=result.fitness_trace,
        ))

    errors = np.array([p.relative_error for p in points])
    relations = {
        "amplitude": [(p.delta_amplitude, p.relative_error) for p in points if p.delta_tau == 0],
        "tau": [(p.delta_tau, p.relative_error) for p in points if p.delta_amplitude == 0],
        "combined": [(p.delta_amplitude, p.relative_error) for p in points
                     if p.delta_amplitude == p.delta_tau],
    }
    fits = {}
    for name, xy in relations.items():
        if len(xy) >= 3:
            xs, ys = zip(*xy)
            fits[name] = _fit_or_none(xs, ys)
    return SweepStats(
        points=points,
        mean_error=float(errors.mean()),
        std_error=float(errors.std(ddof=1)) if errors.size > 1 else 0.0,
        max_abs_error=float(np.abs(errors).max()),
        fits=fits,
    )
