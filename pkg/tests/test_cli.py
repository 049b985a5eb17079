import csv
import json

import numpy as np
import pytest

from cuspshaper.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, main
from cuspshaper.shaper import ShaperParams, shape, to_bus
from cuspshaper.waveio import load_waveform, save_waveform


@pytest.fixture
def pulse_file(tmp_path):
    path = tmp_path / "pulse.csv"
    assert main(["pulse", "--bus", "--out", str(path)]) == EXIT_OK
    return path


def test_pulse_and_shape(tmp_path, pulse_file):
    out = tmp_path / "s.csv"
    assert main(["shape", "--input", str(pulse_file), "--params", "63,31,19,2", "--out", str(out)]) == EXIT_OK
    v = load_waveform(pulse_file)
    assert load_waveform(out).tolist() == shape(v, ShaperParams(63, 31, 19, 2)).tolist()
    manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "shape" and manifest["config"]["params"] == "63,31,19,2"


def test_shape_real_valued_input_is_quantised(tmp_path):
    src = tmp_path / "volts.csv"
    save_waveform(np.array([0.0, 10.0, 5.0]), src)
    out = tmp_path / "s.csv"
    assert main(["shape", "--input", str(src), "--params", "1,0,0,0", "--out", str(out)]) == EXIT_OK
    v = to_bus(np.array([0.0, 10.0, 5.0]))
    assert load_waveform(out).tolist() == shape(v, ShaperParams(1, 0, 0, 0)).tolist()


def test_bad_params(tmp_path, pulse_file, capsys):
    code = main(["shape", "--input", str(pulse_file), "--params", "64,0,0,0", "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_ERROR
    assert "k out of range" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["shape", "--input", str(tmp_path / "nope.csv"), "--params", "1,0,0,0",
                 "--out", str(tmp_path / "o.csv")]) == EXIT_ERROR


def test_malformed_waveform(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("n,value\n0,1\n1,zz\n")
    assert main(["shape", "--input", str(bad), "--params", "1,0,0,0", "--out", str(tmp_path / "o.csv")]) == EXIT_ERROR
    assert "bad.csv:3" in capsys.readouterr().err


def test_overflow_trap(tmp_path, capsys):
    src = tmp_path / "big.csv"
    save_waveform(np.full(2000, 8191), src)
    args = ["shape", "--input", str(src), "--params", "63,0,8191,8191", "--out", str(tmp_path / "o.csv")]
    assert main(args) == EXIT_ERROR
    assert "overflow" in capsys.readouterr().err
    assert main(args + ["--policy", "saturate"]) == EXIT_OK


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["shape", "--params", "1,0,0,0"])
    assert exc.value.code == EXIT_ERROR


def test_calibrate_converges_from_initial(tmp_path, pulse_file):
    ref = tmp_path / "ref.csv"
    main(["shape", "--input", str(pulse_file), "--params", "63,31,19,2", "--out", str(ref)])
    out = tmp_path / "cal.json"
    code = main(["calibrate", "--input", str(pulse_file), "--reference-output", str(ref),
                 "--initial", "63,31,19,2", "--seed", "1", "--out", str(out)])
    assert code == EXIT_OK
    result = json.loads(out.read_text())
    assert result["best_fitness"] == 0 and result["converged"]


def test_calibrate_not_converged(tmp_path, pulse_file):
    ref = tmp_path / "ref.csv"
    main(["shape", "--input", str(pulse_file), "--params", "63,31,19,2", "--out", str(ref)])
    code = main(["calibrate", "--input", str(pulse_file), "--reference-output", str(ref),
                 "--seed", "1", "--max-generations", "5", "--out", str(tmp_path / "c.json")])
    assert code == EXIT_NOT_CONVERGED


def test_calibrate_deterministic(tmp_path, pulse_file):
    ref = tmp_path / "ref.csv"
    main(["shape", "--input", str(pulse_file), "--params", "63,31,19,2", "--out", str(ref)])
    outs = []
    for name in ("a.json", "b.json"):
        main(["calibrate", "--input", str(pulse_file), "--reference-output", str(ref),
              "--seed", "9", "--max-generations", "50", "--out", str(tmp_path / name)])
        d = json.loads((tmp_path / name).read_text())
        outs.append((d["fitness_trace"], d["best_params"]))
    assert outs[0] == outs[1]


def test_calibrate_length_mismatch(tmp_path, pulse_file, capsys):
    ref = tmp_path / "ref.csv"
    save_waveform(np.zeros(10, dtype=int), ref)
    code = main(["calibrate", "--input", str(pulse_file), "--reference-output", str(ref),
                 "--seed", "1", "--out", str(tmp_path / "c.json")])
    assert code == EXIT_ERROR
    assert "length mismatch" in capsys.readouterr().err


def test_degrade(tmp_path):
    src = tmp_path / "v.csv"
    main(["pulse", "--out", str(src)])
    out = tmp_path / "d.csv"
    assert main(["degrade", "--input", str(src), "--delta", "0.8", "--seed", "3", "--out", str(out)]) == EXIT_OK
    assert load_waveform(out)[0] == pytest.approx(0.8 * 20 + 0.2)


def test_degrade_delta_zero(tmp_path, capsys):
    src = tmp_path / "v.csv"
    main(["pulse", "--out", str(src)])
    code = main(["degrade", "--input", str(src), "--delta", "0", "--seed", "3", "--out", str(tmp_path / "d.csv")])
    assert code == EXIT_ERROR
    assert "delta must be in" in capsys.readouterr().err


def test_histogram(tmp_path):
    events = tmp_path / "events.csv"
    assert main(["pulse", "--events", "1000", "--seed", "4", "--n-samples", "64", "--out", str(events)]) == EXIT_OK
    out = tmp_path / "h.csv"
    assert main(["histogram", "--events", str(events), "--params", "31,15,57,13", "--bins", "64",
                 "--out", str(out)]) == EXIT_OK
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 64 and sum(int(r["count"]) for r in rows) == 1000
    assert (tmp_path / "h.png").stat().st_size > 0


def test_experiment_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["experiment", "sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == EXIT_ERROR


def test_experiment_sweep_small(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"variations": [[0, 0], [10, 0], [-10, 0]],
                               "ga": {"max_generations": 100, "stall_generations": 20}}))
    out = tmp_path / "o"
    assert main(["experiment", "sweep", "--config", str(cfg), "--out-dir", str(out), "--seed", "3"]) == EXIT_OK
    stats = json.loads((out / "sweep.json").read_text())
    assert len(stats["points"]) == 3
    assert (out / "sweep.png").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3 and "figure" in manifest["outputs"]


def test_experiment_degeneration_small(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_events": 50, "deltas": [0.8],
                               "ga": {"max_generations": 100, "stall_generations": 20}}))
    out = tmp_path / "o"
    assert main(["experiment", "degeneration", "--config", str(cfg), "--out-dir", str(out),
                 "--no-plots"]) == EXIT_OK
    summary = json.loads((out / "degeneration.json").read_text())
    assert summary[0]["delta"] == 0.8
    assert (out / "histogram_delta_0.8.csv").exists()
    assert not list(out.glob("*.png"))


def test_experiment_scratch_small(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"runs": 2, "ga": {"max_generations": 10}}))
    out = tmp_path / "o"
    assert main(["experiment", "scratch", "--config", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    stats = json.loads((out / "stats.json").read_text())
    assert stats["runs"] == 2
    assert (out / "convergence.png").exists()
