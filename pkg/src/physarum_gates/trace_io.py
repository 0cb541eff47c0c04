"""Reading and writing traces as CSV, sidecar stimulation times, and reports.

Canonical trace CSV::

    time_s,potential_mV
    0,1.23456
    1,1.30021

Time is written as an integer number of seconds for 1 Hz traces and the
potential with 6 significant digits in positional notation.  The stimulation
time lives in a sidecar JSON next to the CSV (``trial.csv`` -> ``trial.json``).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dsp import FrequencyChange
from .errors import NonUniformSampling, OutOfRange, ParseError, TraceError
from .gates import AccuracyReport, AccuracyDistribution, bits_label
from .synth import FULL_SCALE_MV, Provenance, Trace

logger = logging.getLogger(__name__)

HEADER = ("time_s", "potential_mV")
VOLTAGE_DIGITS = 6
# relative tolerance on sample spacing before a gap is reported
SPACING_RTOL = 1e-6


def format_voltage(v: float) -> str:
    text = np.format_float_positional(v, precision=VOLTAGE_DIGITS, unique=False, fractional=False, trim="-")
    return "0" if text in ("-0", "0") else text


def canonical_voltage(v: float) -> float:
    """The value a voltage takes after a write/read cycle."""
    return float(format_voltage(v))


def format_time(t: float, sample_rate: float) -> str:
    if sample_rate == 1.0 and float(t).is_integer():
        return str(int(t))
    return np.format_float_positional(t, unique=True, trim="-")


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def write_sidecar(path: str | Path, stimulation_time: float) -> Path:
    side = sidecar_path(path)
    side.write_text(json.dumps({"stimulation_time_s": stimulation_time}) + "\n", encoding="utf-8")
    return side


def read_sidecar(path: str | Path) -> float | None:
    side = sidecar_path(path)
    if not side.exists():
        return None
    try:
        return float(json.loads(side.read_text(encoding="utf-8"))["stimulation_time_s"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise TraceError(f"{side}: malformed sidecar ({exc})") from None


def read_trace(
    path: str | Path,
    sample_rate_override: float | None = None,
    stimulation_time: float | None = None,
    resample: bool = False,
    clip: bool = False,
) -> Trace:
    """Load and validate a trace CSV.

    Rows are numbered from 1 at the header.  Non-uniform timestamps raise
    NonUniformSampling naming the first offending row unless `resample` is set,
    in which case the samples are linearly interpolated onto a uniform grid.
    Potentials beyond +/-39 mV raise OutOfRange unless `clip` is set.  The
    stimulation time falls back to the sidecar JSON when not given.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TraceError(f"{path}: {exc.strerror or exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError(f"{path}: empty file", row=1)
    header = tuple(c.strip() for c in rows[0])
    if header != HEADER:
        raise ParseError(f"{path}: expected header {','.join(HEADER)}, got {','.join(header)}", row=1)
    t = np.empty(len(rows) - 1)
    v = np.empty(len(rows) - 1)
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != 2:
            raise ParseError(f"{path}: expected 2 columns, got {len(row)}", row=lineno)
        for col, (cell, dest) in enumerate(zip(row, (t, v)), start=1):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"{path}: not a number: {cell!r}", row=lineno, column=col) from None
            if not math.isfinite(value):
                raise ParseError(f"{path}: non-finite value {cell!r}", row=lineno, column=col)
            dest[i] = value
    if len(t) < 2:
        raise ParseError(f"{path}: need at least two samples, got {len(t)}", row=len(rows))

    dt = np.diff(t)
    if sample_rate_override is not None:
        fs = float(sample_rate_override)
    else:
        fs = 1.0 / dt[0] if dt[0] > 0 else 0.0
    if fs <= 0:
        raise NonUniformSampling(f"{path}: timestamps must increase", row=3, column=1)
    bad = np.flatnonzero(np.abs(dt * fs - 1.0) > SPACING_RTOL)
    if bad.size:
        if not resample or np.any(dt <= 0):
            first = int(bad[0])
            raise NonUniformSampling(
                f"{path}: sample spacing {dt[first]:g} s differs from {1 / fs:g} s", row=first + 3, column=1
            )
        grid = t[0] + np.arange(int(np.floor((t[-1] - t[0]) * fs + 1e-9)) + 1) / fs
        v = np.interp(grid, t, v)
        t = grid
        logger.info("%s: resampled %d irregular samples onto %g Hz", path, len(dt), fs)

    over = np.flatnonzero(np.abs(v) > FULL_SCALE_MV)
    if over.size:
        if not clip:
            raise OutOfRange(
                f"{path}: |potential| {abs(v[over[0]]):g} mV exceeds {FULL_SCALE_MV} mV", row=int(over[0]) + 2, column=2
            )
        logger.warning("%s: clipped %d samples beyond +/-%g mV", path, over.size, FULL_SCALE_MV)
        v = np.clip(v, -FULL_SCALE_MV, FULL_SCALE_MV)

    if stimulation_time is None:
        stimulation_time = read_sidecar(path)
    return Trace(t=t, v=v, sample_rate=fs, stimulation_time=stimulation_time, provenance=Provenance.INGESTED)


def trace_to_csv(trace: Trace) -> str:
    if len(trace) == 0:
        raise TraceError("cannot write an empty trace")
    lines = [",".join(HEADER)]
    lines.extend(
        f"{format_time(t, trace.sample_rate)},{format_voltage(v)}" for t, v in zip(trace.t.tolist(), trace.v.tolist())
    )
    return "\n".join(lines) + "\n"


def write_trace(trace: Trace, path: str | Path, sidecar: bool = False) -> None:
    """Write the canonical CSV (and the stimulation-time sidecar if asked)."""
    path = Path(path)
    text = trace_to_csv(trace)
    try:
        path.write_text(text, encoding="utf-8")
        if sidecar and trace.stimulation_time is not None:
            write_sidecar(path, trace.stimulation_time)
    except OSError as exc:
        raise TraceError(f"{path}: {exc.strerror or exc}") from exc


FREQUENCY_CHANGE_COLUMNS = ("f_pre_hz", "f_post_hz", "change_pct")


def emit_report(
    report: AccuracyReport | AccuracyDistribution | FrequencyChange | Sequence[FrequencyChange],
    format: str = "json",
) -> str:
    """Serialize a report with stable key and row ordering."""
    if format not in ("json", "csv"):
        raise ValueError(f"unknown report format {format!r}")
    if isinstance(report, (AccuracyReport, AccuracyDistribution, FrequencyChange)):
        if format == "json":
            return json.dumps(report.to_dict(), indent=2) + "\n"
        if isinstance(report, FrequencyChange):
            return _changes_csv([report])
        if isinstance(report, AccuracyDistribution):
            raise ValueError("accuracy distributions are emitted as JSON only")
        return _accuracy_csv(report)
    batch = list(report)
    if format == "json":
        return json.dumps([fc.to_dict() for fc in batch], indent=2) + "\n"
    return _changes_csv(batch)


def _changes_csv(batch: Iterable[FrequencyChange]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FREQUENCY_CHANGE_COLUMNS)
    for fc in batch:
        writer.writerow([repr(float(fc.f_pre)), repr(float(fc.f_post)), repr(float(fc.change_pct))])
    return buf.getvalue()


def _accuracy_csv(report: AccuracyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("gate", "threshold_pct", "combination", "correct_fraction"))
    for bits, frac in sorted(report.per_combination.items()):
        writer.writerow((report.gate.kind.value, repr(report.gate.threshold_pct), bits_label(bits), repr(float(frac))))
    writer.writerow((report.gate.kind.value, repr(report.gate.threshold_pct), "aggregate", repr(float(report.aggregate))))
    return buf.getvalue()
