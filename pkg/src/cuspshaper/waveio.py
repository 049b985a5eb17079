"""CSV storage for waveforms and event sets.

A waveform file has the header ``n,value`` and one row per sample. Integer
values load as an int64 array (bus samples); anything else loads as float.
An event set is either a directory of waveform files or a single CSV with
the header ``event_id,n,value``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class WaveformFormatError(ValueError):
    pass


def _parse_number(text: str, path, lineno: int):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise WaveformFormatError(f"{path}:{lineno}: not a number: {text!r}") from None


def _as_array(values: list) -> np.ndarray:
    if all(isinstance(x, int) for x in values):
        return np.array(values, dtype=np.int64)
    return np.array(values, dtype=float)


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1) if row]
    if not rows:
        raise WaveformFormatError(f"{path}: no samples")
    header = [h.strip() for h in rows[0][1]]
    return header, rows[1:]


def load_waveform(path) -> np.ndarray:
    header, rows = _read_rows(path)
    if header != ["n", "value"]:
        raise WaveformFormatError(f"{path}:1: expected header 'n,value', got {','.join(header)!r}")
    if not rows:
        raise WaveformFormatError(f"{path}: no samples")
    values = []
    for expected, (lineno, row) in enumerate(rows):
        if len(row) != 2:
            raise WaveformFormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        n = _parse_number(row[0], path, lineno)
        if n != expected:
            raise WaveformFormatError(f"{path}:{lineno}: sample index {row[0]!r}, expected {expected}")
        values.append(_parse_number(row[1], path, lineno))
    return _as_array(values)


def _format(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def save_waveform(samples, path) -> None:
    samples = np.asarray(samples)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "value"])
        for n, x in enumerate(samples.tolist()):
            writer.writerow([n, _format(x)])


def load_events(path) -> list[np.ndarray]:
    """Load an event set from a directory of waveform CSVs or one combined CSV."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise WaveformFormatError(f"{path}: no event files")
        return [load_waveform(f) for f in files]

    header, rows = _read_rows(path)
    if header == ["n", "value"]:
        return [load_waveform(path)]
    if header != ["event_id", "n", "value"]:
        raise WaveformFormatError(f"{path}:1: expected header 'event_id,n,value'")
    events: dict[str, list] = {}
    for lineno, row in rows:
        if len(row) != 3:
            raise WaveformFormatError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        key = row[0].strip()
        values = events.setdefault(key, [])
        n = _parse_number(row[1], path, lineno)
        if n != len(values):
            raise WaveformFormatError(f"{path}:{lineno}: sample index {n}, expected {len(values)}")
        values.append(_parse_number(row[2], path, lineno))
    if not events:
        raise WaveformFormatError(f"{path}: no samples")
    return [_as_array(v) for v in events.values()]


def save_events(events, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event_id", "n", "value"])
        for i, samples in enumerate(events):
            for n, x in enumerate(np.asarray(samples).tolist()):
                writer.writerow([i, n, _format(x)])
