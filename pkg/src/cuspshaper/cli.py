"""Command-line interface.

Exit codes: 0 success, 1 usage / I/O / validation error, 2 calibration
finished without reaching the target fitness.
"""

from __future__ import annotations

import argparse
import csv
import json
import secrets
import sys
from dataclasses import asdict
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import ga
from .fitness import FitnessKind, ShaperFitness
from .shaper import ArithmeticPolicy, ShaperOverflowError, ShaperParams, shape, to_bus
from .signals import DegradationSpec, PulseSpec, degrade, gen_exponential
from .waveio import WaveformFormatError, load_events, load_waveform, save_events, save_waveform

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _write_manifest(path: Path, subcommand: str, config: dict, inputs: dict, outputs: dict, seed):
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "seed": seed,
        "tool_version": _tool_version(),
    }
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _resolve_seed(seed):
    if seed is None:
        seed = secrets.randbits(32)
        print(f"seed: {seed}", file=sys.stderr)
    return int(seed)


def _policy(args) -> ArithmeticPolicy:
    return ArithmeticPolicy(args.accumulator_bits, args.policy)


def _bus_input(samples: np.ndarray, full_scale: float) -> np.ndarray:
    if np.issubdtype(samples.dtype, np.integer):
        return samples
    return to_bus(samples, full_scale)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# -- subcommands -------------------------------------------------------------


def cmd_shape(args) -> int:
    params = ShaperParams.parse(args.params)
    policy = _policy(args)
    v = _bus_input(load_waveform(args.input), args.full_scale)
    s = shape(v, params, policy)
    save_waveform(s, args.out)
    _write_manifest(_manifest_path(args.out), "shape",
                    {"params": str(params), **asdict(policy), "full_scale": args.full_scale},
                    {"input": args.input}, {"output": args.out}, None)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = ga.GaConfig.load(args.ga_config) if args.ga_config else ga.GaConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    elif not args.ga_config:
        config = config.replace(seed=_resolve_seed(None))
    if args.max_generations is not None:
        config = config.replace(max_generations=args.max_generations)
    policy = _policy(args)
    v = _bus_input(load_waveform(args.input), args.full_scale)
    s_ref = load_waveform(args.reference_output)
    if v.size != s_ref.size:
        raise CliError(f"length mismatch: input has {v.size} samples, reference {s_ref.size}")
    initial = [ShaperParams.parse(args.initial)] if args.initial else []
    fitness = ShaperFitness(v, s_ref, FitnessKind.parse(args.fitness), policy)
    result = ga.evolve(config, fitness, initial=initial)
    Path(args.out).write_text(result.to_json(indent=2) + "\n")
    _write_manifest(_manifest_path(args.out), "calibrate",
                    {"ga": asdict(config), "fitness": args.fitness, **asdict(policy),
                     "initial": args.initial},
                    {"input": args.input, "reference_output": args.reference_output},
                    {"result": args.out}, config.seed)
    print(f"best {result.best_params} fitness {result.best_fitness} "
          f"after {result.generations} generations", file=sys.stderr)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_degrade(args) -> int:
    seed = _resolve_seed(args.seed)
    spec = DegradationSpec(args.delta, args.serial_sigma, args.parallel_amp, args.threshold, seed)
    v = load_waveform(args.input).astype(float)
    save_waveform(degrade(v, spec), args.out)
    _write_manifest(_manifest_path(args.out), "degrade", asdict(spec),
                    {"input": args.input}, {"output": args.out}, seed)
    return EXIT_OK


def cmd_pulse(args) -> int:
    spec = PulseSpec(args.amplitude, args.tau, args.t_clk, args.n_samples, args.onset)
    if args.events:
        seed = _resolve_seed(args.seed)
        save_events(ex.synthetic_events(args.events, spec, args.spread, seed), args.out)
    else:
        seed = None
        v = gen_exponential(spec)
        save_waveform(to_bus(v, args.full_scale) if args.bus else v, args.out)
    _write_manifest(_manifest_path(args.out), "pulse",
                    {**asdict(spec), "events": args.events, "spread": args.spread,
                     "bus": args.bus, "full_scale": args.full_scale},
                    {}, {"output": args.out}, seed)
    return EXIT_OK


def cmd_histogram(args) -> int:
    params = ShaperParams.parse(args.params)
    policy = _policy(args)
    events = [_bus_input(ev, args.full_scale) for ev in load_events(args.events)]
    value_range = None
    if args.range:
        lo, hi = (float(x) for x in args.range.split(","))
        value_range = (lo, hi)
    h = ex.build_histogram(events, params, args.bins, value_range, policy)
    _write_csv(args.out, ["bin_lo", "bin_hi", "count"],
               zip(h.bin_edges[:-1].tolist(), h.bin_edges[1:].tolist(), h.counts.tolist()))
    outputs = {"histogram": args.out}
    if not args.no_plots:
        from .report import plot_histograms
        figure = Path(args.out).with_suffix(".png")
        plot_histograms({"events": h}, figure, title=f"params {params}")
        outputs["figure"] = figure
    _write_manifest(_manifest_path(args.out), "histogram",
                    {"params": str(params), "bins": args.bins, "range": args.range,
                     "full_scale": args.full_scale, **asdict(policy)},
                    {"events": args.events}, outputs, None)
    return EXIT_OK


# -- experiments -------------------------------------------------------------

DEFAULT_EXPERIMENTS = {
    "scratch": {
        "runs": 20,
        "reference": "63,31,19,2",
        "pulse": asdict(ex.SYNTHETIC_PULSE),
        "ga": asdict(ga.GaConfig()),
        "fitness": "f2",
        "full_scale": 20.0,
        "seed": 2024,
    },
    "degeneration": {
        "reference": "31,15,57,13",
        "deltas": [0.8, 0.6],
        "serial_sigma": None,
        "parallel_amp": None,
        "threshold": 1.0,
        "n_events": 1000,
        "spread": 0.03,
        "events": None,
        "pulse": asdict(ex.event_pulse()),
        "ga": asdict(ex.RECALIBRATION_GA),
        "fitness": "f2",
        "full_scale": 25.0,
        "bins": 128,
        "calibration_index": 0,
        "seed": 2024,
    },
    "sweep": {
        "reference": "63,31,19,2",
        "pulse": asdict(ex.SYNTHETIC_PULSE),
        "points": 5,
        "max_percent": 30.0,
        "variations": None,
        "ga": asdict(ex.RECALIBRATION_GA),
        "fitness": "f2",
        "full_scale": 26.0,
        "seed": 2024,
    },
}


def load_experiment_config(kind: str, path=None, seed=None) -> dict:
    config = json.loads(json.dumps(DEFAULT_EXPERIMENTS[kind]))
    if path:
        with open(path) as fh:
            user = json.load(fh)
        declared = user.pop("experiment", kind)
        if declared != kind:
            raise CliError(f"config is for experiment {declared!r}, not {kind!r}")
        unknown = set(user) - set(config)
        if unknown:
            raise CliError(f"unknown {kind} config keys: {sorted(unknown)}")
        for key, value in user.items():
            if isinstance(config[key], dict) and isinstance(value, dict):
                config[key].update(value)
            else:
                config[key] = value
    if seed is not None:
        config["seed"] = seed
    return config


def _experiment_scratch(config, out: Path, plots: bool) -> dict:
    summary, results = ex.run_scratch(
        runs=config["runs"],
        reference=ShaperParams.parse(config["reference"]),
        pulse=PulseSpec(**config["pulse"]),
        ga_config=ga.GaConfig.from_dict(config["ga"]),
        kind=FitnessKind.parse(config["fitness"]),
        full_scale=config["full_scale"],
        seed=config["seed"],
    )
    outputs = {"stats": out / "stats.json", "runs": out / "runs.csv", "traces": out / "traces.csv"}
    outputs["stats"].write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    _write_csv(outputs["runs"], ["seed", "converged", "generations", "wall_time", "best_fitness", "best_params"],
               ([r["seed"], int(r["converged"]), r["generations"], r["wall_time"],
                 r["best_fitness"], r["best_params"]] for r in summary.per_run))
    _write_csv(outputs["traces"], ["run", "generation", "best_fitness"],
               ([i, g + 1, f] for i, r in enumerate(results) for g, f in enumerate(r.fitness_trace)))
    if plots:
        from .report import plot_convergence
        outputs["figure"] = out / "convergence.png"
        plot_convergence(results, outputs["figure"])
    print(f"scratch: {summary.successes}/{summary.runs} converged, "
          f"median generations {summary.generations['median']:.0f}", file=sys.stderr)
    return outputs


def _experiment_degeneration(config, out: Path, plots: bool) -> dict:
    reference = ShaperParams.parse(config["reference"])
    pulse = PulseSpec(**config["pulse"])
    if config["events"]:
        events = [np.asarray(ev, dtype=float) for ev in load_events(config["events"])]
    else:
        events = ex.synthetic_events(config["n_events"], pulse, config["spread"], config["seed"])
    ga_config = ga.GaConfig.from_dict(config["ga"])
    full_scale = config["full_scale"]
    amplitude = float(np.max(events[config["calibration_index"]]))
    outputs = {}
    summaries = []
    for i, delta in enumerate(config["deltas"]):
        deg = DegradationSpec.with_default_noise(delta, amplitude, threshold=config["threshold"],
                                                 seed=config["seed"] + i)
        if config["serial_sigma"] is not None or config["parallel_amp"] is not None:
            deg = DegradationSpec(
                delta,
                deg.serial_sigma if config["serial_sigma"] is None else config["serial_sigma"],
                deg.parallel_amp if config["parallel_amp"] is None else config["parallel_amp"],
                config["threshold"], config["seed"] + i)
        result = ex.run_degeneration(events, deg, reference, ga_config.replace(seed=config["seed"] + i),
                                     FitnessKind.parse(config["fitness"]), full_scale,
                                     config["calibration_index"])
        hists = ex.restoration_histograms(events, result.degraded_events, reference,
                                          result.regenerated, config["bins"], full_scale)
        tag = f"delta_{delta:g}"
        summary = result.summary()
        summary.update({"delta": delta, "degradation": asdict(deg),
                        "mode_bins": {k: h.mode_bin for k, h in hists.items()}})
        summaries.append(summary)
        wave_path = out / f"waveforms_{tag}.csv"
        _write_csv(wave_path, ["n", "v_original", "v_degraded", "s_reference", "s_damaged", "s_restored"],
                   zip(range(len(result.v_original)), result.v_original.tolist(),
                       result.v_degraded.tolist(), result.s_reference.tolist(),
                       result.s_damaged.tolist(), result.s_restored.tolist()))
        hist_path = out / f"histogram_{tag}.csv"
        edges = hists["original"].bin_edges
        _write_csv(hist_path, ["bin_lo", "bin_hi", "original", "damaged", "restored"],
                   zip(edges[:-1].tolist(), edges[1:].tolist(), hists["original"].counts.tolist(),
                       hists["damaged"].counts.tolist(), hists["restored"].counts.tolist()))
        trace_path = out / f"trace_{tag}.csv"
        _write_csv(trace_path, ["generation", "best_fitness"],
                   ((g + 1, f) for g, f in enumerate(result.evolution.fitness_trace)))
        outputs.update({f"waveforms_{tag}": wave_path, f"histogram_{tag}": hist_path,
                        f"trace_{tag}": trace_path})
        if plots:
            from .report import plot_degeneration, plot_histograms
            outputs[f"figure_outputs_{tag}"] = out / f"outputs_{tag}.png"
            outputs[f"figure_histogram_{tag}"] = out / f"histogram_{tag}.png"
            plot_degeneration(result, outputs[f"figure_outputs_{tag}"], delta)
            plot_histograms(hists, outputs[f"figure_histogram_{tag}"], title=f"delta = {delta}")
        print(f"delta {delta}: regenerated {result.regenerated}, "
              f"peak error {result.relative_error:+.2f}%", file=sys.stderr)
    outputs["summary"] = out / "degeneration.json"
    outputs["summary"].write_text(json.dumps(summaries, indent=2) + "\n")
    return outputs


def _experiment_sweep(config, out: Path, plots: bool) -> dict:
    variations = config["variations"]
    if variations is None:
        variations = ex.default_variations(config["points"], config["max_percent"])
    sweep = ex.run_sweep(
        variations=[tuple(v) for v in variations],
        reference=ShaperParams.parse(config["reference"]),
        pulse=PulseSpec(**config["pulse"]),
        ga_config=ga.GaConfig.from_dict(config["ga"]),
        kind=FitnessKind.parse(config["fitness"]),
        full_scale=config["full_scale"],
        seed=config["seed"],
    )
    outputs = {"stats": out / "sweep.json", "points": out / "sweep_points.csv"}
    outputs["stats"].write_text(json.dumps(sweep.to_dict(), indent=2) + "\n")
    _write_csv(outputs["points"],
               ["delta_amplitude", "delta_tau", "amplitude", "tau", "relative_error",
                "params", "fitness", "generations"],
               ([p.delta_amplitude, p.delta_tau, p.amplitude, p.tau, p.relative_error,
                 p.params, p.fitness, p.generations] for p in sweep.points))
    if plots:
        from .report import plot_sweep
        outputs["figure"] = out / "sweep.png"
        plot_sweep(sweep, outputs["figure"])
    print(f"sweep: max |e| {sweep.max_abs_error:.2f}%, mean {sweep.mean_error:+.2f}% "
          f"+- {sweep.std_error:.2f}%", file=sys.stderr)
    return outputs


def cmd_experiment(args) -> int:
    config = load_experiment_config(args.kind, args.config, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = {"scratch": _experiment_scratch, "degeneration": _experiment_degeneration,
              "sweep": _experiment_sweep}[args.kind]
    outputs = runner(config, out, not args.no_plots)
    _write_manifest(out / "manifest.json", f"experiment {args.kind}", config,
                    {"config": args.config}, outputs, config["seed"])
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_policy(p):
    p.add_argument("--policy", default="trap", choices=["trap", "saturate", "wrap"],
                   help="accumulator overflow handling (default: trap)")
    p.add_argument("--accumulator-bits", type=int, default=48)


def _add_full_scale(p, default=20.0):
    p.add_argument("--full-scale", type=float, default=default,
                   help="volts mapped to bus code 8191 when the input is real-valued")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cuspshaper", description="Evolvable cusp-like pulse shaper emulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("shape", help="run the shaper over a waveform CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--params", required=True, help="k,l,m1,m2")
    p.add_argument("--out", required=True)
    _add_policy(p)
    _add_full_scale(p)
    p.set_defaults(func=cmd_shape)

    p = sub.add_parser("calibrate", help="evolve parameters that reproduce a reference output")
    p.add_argument("--input", required=True)
    p.add_argument("--reference-output", required=True)
    p.add_argument("--fitness", default="f2", choices=["f1", "f2", "f3"])
    p.add_argument("--ga-config", help="GA config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-generations", type=int)
    p.add_argument("--initial", help="k,l,m1,m2 of the deployed design to seed the population")
    p.add_argument("--out", required=True)
    _add_policy(p)
    _add_full_scale(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("degrade", help="apply the sensor degradation model")
    p.add_argument("--input", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--serial-sigma", type=float, default=0.0)
    p.add_argument("--parallel-amp", type=float, default=0.0)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("pulse", help="generate a synthetic exponential pulse or event set")
    p.add_argument("--amplitude", type=float, default=20.0)
    p.add_argument("--tau", type=float, default=200e-6)
    p.add_argument("--t-clk", type=float, default=20e-6)
    p.add_argument("--n-samples", type=int, default=72)
    p.add_argument("--onset", type=int, default=0)
    p.add_argument("--bus", action="store_true", help="write 14-bit bus codes instead of volts")
    p.add_argument("--events", type=int, default=0, help="write an event set of this many pulses")
    p.add_argument("--spread", type=float, default=0.03)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    _add_full_scale(p)
    p.set_defaults(func=cmd_pulse)

    p = sub.add_parser("experiment", help="run an experiment set")
    p.add_argument("kind", choices=sorted(DEFAULT_EXPERIMENTS))
    p.add_argument("--config", help="experiment config JSON (defaults used when omitted)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("histogram", help="pulse-height histogram of an event set")
    p.add_argument("--events", required=True, help="event CSV or directory of waveform CSVs")
    p.add_argument("--params", required=True)
    p.add_argument("--bins", type=int, default=128)
    p.add_argument("--range", help="lo,hi of the histogram (default 0 to 1.2 x max peak)")
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")
    _add_policy(p)
    _add_full_scale(p)
    p.set_defaults(func=cmd_histogram)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, ShaperOverflowError, OSError, WaveformFormatError) as exc:
        print(f"cuspshaper {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
