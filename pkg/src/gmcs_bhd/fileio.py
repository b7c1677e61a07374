"""Flat-file formats: traces, quadrature series, sweep tables and fit tables.

Every file starts with ``#`` metadata lines. Traces are two columns
``time_seconds, volts`` under a one-line header; sweeps and fits are
delimiter-separated tables whose first non-comment row names the columns.
"""
from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from . import __version__
from .montecarlo import PulseTrace, QuadratureSeries

TRACE_HEADER = "time_seconds,volts"
DELIMITERS = {"csv": ",", "tsv": "\t"}


class TraceFormatError(ValueError):
    pass


def _comment_block(lines) -> str:
    return "".join(f"# {line}\n" for line in lines)


def provenance(command: str, params: list[str] | None = None) -> list[str]:
    lines = [f"gmcs_bhd {__version__}", f"command: {command}"]
    if params:
        lines += [f"param {p}" for p in params]
    return lines


# -- traces -------------------------------------------------------------

def write_trace(path, trace: PulseTrace, repetition_hz: float, first_center_s: float,
                metadata: list[str] | None = None, n_pulses: int | None = None) -> None:
    """Write ``trace`` as two columns; ``n_pulses`` truncates to the first pulses."""
    samples = trace.samples
    starts = trace.pulse_starts
    if n_pulses is not None and n_pulses < starts.size:
        end = int(starts[n_pulses]) if n_pulses < starts.size else samples.size
        samples = samples[:end]
        starts = starts[:n_pulses]
    meta = list(metadata or []) + [
        f"sample_period_s = {trace.sample_period_s!r}",
        f"repetition_hz = {float(repetition_hz)!r}",
        f"first_center_s = {float(first_center_s)!r}",
        f"window_samples = {trace.window_samples}",
        f"n_pulses = {starts.size}",
        "pulse_starts = " + ",".join(str(int(i)) for i in starts),
    ]
    t = np.arange(samples.size) * trace.sample_period_s
    with open(path, "w") as fh:
        fh.write(_comment_block(meta))
        fh.write(TRACE_HEADER + "\n")
        np.savetxt(fh, np.column_stack([t, samples]), delimiter=",", fmt="%.17g")


def _meta(lines: list[str]) -> dict[str, str]:
    out = {}
    for line in lines:
        m = re.match(r"#\s*([A-Za-z_]+)\s*=\s*(\S+)", line)
        if m:
            out[m.group(1)] = m.group(2)
    return out


def read_trace_columns(path, ncols: int = 2) -> tuple[np.ndarray, np.ndarray, dict[str, str]]:
    """Read ``(times, volts, metadata)``; comma or whitespace separated.

    Rows must hold exactly ``ncols`` values (``None`` accepts any count of at
    least two); only the first two are returned. Malformed rows raise
    :class:`TraceFormatError` naming the line number.
    """
    text = Path(path).read_text().splitlines()
    comments = [ln for ln in text if ln.lstrip().startswith("#")]
    rows_t, rows_v = [], []
    for n, line in enumerate(text, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = [p for p in re.split(r"[,\s]+", s) if p]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            if not rows_t and re.match(r"[A-Za-z_]", parts[0]):
                continue  # column-name header
            raise TraceFormatError(f"{path}:{n}: not numeric: {s!r}") from None
        if (ncols is not None and len(vals) != ncols) or len(vals) < 2:
            raise TraceFormatError(f"{path}:{n}: expected {ncols or 'at least 2'} columns, "
                                   f"found {len(vals)}")
        rows_t.append(vals[0])
        rows_v.append(vals[1])
    if len(rows_t) < 2:
        raise TraceFormatError(f"{path}: trace needs at least 2 samples")
    return np.array(rows_t), np.array(rows_v), _meta(comments)


def segment_trace(times: np.ndarray, volts: np.ndarray, repetition_hz: float,
                  window_s: float, first_center_s: float | None = None) -> PulseTrace:
    """Cut a uniformly sampled trace into pulse windows centred every ``1/R``."""
    dt = float(np.median(np.diff(times)))
    if not dt > 0 or not np.allclose(np.diff(times), dt, rtol=1e-6, atol=0):
        raise TraceFormatError("trace times must be uniformly increasing")
    period = 1.0 / repetition_hz
    m = int(round(window_s / dt))
    if m < 1:
        raise TraceFormatError("window shorter than one sample")
    center0 = period / 2 if first_center_s is None else first_center_s
    t0 = times[0]
    centers = center0 + period * np.arange(int((times[-1] - t0) / period) + 2)
    starts = np.rint((centers - t0) / dt - m / 2).astype(np.int64)
    starts = starts[(starts >= 0) & (starts + m <= volts.size)]
    if starts.size == 0:
        raise TraceFormatError("no complete pulse window in the trace")
    return PulseTrace(dt, volts, starts, m)


def read_trace(path, repetition_hz: float | None = None, window_s: float | None = None,
               first_center_s: float | None = None) -> PulseTrace:
    """Read a trace; segmentation comes from arguments, else from its metadata."""
    times, volts, meta = read_trace_columns(path)
    overridden = any(v is not None for v in (repetition_hz, window_s, first_center_s))
    if not overridden and "pulse_starts" in meta and "window_samples" in meta:
        dt = float(meta.get("sample_period_s", np.median(np.diff(times))))
        starts = np.array([int(v) for v in meta["pulse_starts"].split(",")], dtype=np.int64)
        try:
            return PulseTrace(dt, volts, starts, int(meta["window_samples"]))
        except ValueError as exc:
            raise TraceFormatError(f"{path}: {exc}") from None
    if repetition_hz is None:
        if "repetition_hz" not in meta:
            raise TraceFormatError(f"{path}: repetition rate not given and not in metadata")
        repetition_hz = float(meta["repetition_hz"])
    if window_s is None:
        if "window_samples" in meta:
            dt = float(np.median(np.diff(times)))
            window_s = int(meta["window_samples"]) * dt
        else:
            window_s = 1.0 / repetition_hz
    if first_center_s is None and "first_center_s" in meta:
        first_center_s = float(meta["first_center_s"])
    return segment_trace(times, volts, repetition_hz, window_s, first_center_s)


# -- quadratures ------------------------------------------------------

def write_quadratures(path, series: QuadratureSeries, metadata: list[str] | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(_comment_block(metadata or []))
        np.savetxt(fh, series.values, fmt="%.17g")


def read_quadratures(path) -> QuadratureSeries:
    return QuadratureSeries(np.loadtxt(path, comments="#", ndmin=1))


# -- delimited tables -------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_table(path, columns: list[str], rows, metadata: list[str] | None = None,
                fmt: str = "csv") -> None:
    sep = DELIMITERS[fmt]
    with open(path, "w") as fh:
        fh.write(_comment_block(metadata or []))
        fh.write(sep.join(columns) + "\n")
        for row in rows:
            fh.write(sep.join(_fmt(v) for v in row) + "\n")


def _column(cells: list[str]) -> np.ndarray:
    try:
        return np.array([float(x) if x else math.nan for x in cells])
    except ValueError:
        return np.array(cells, dtype=object)


def read_table(path) -> tuple[dict[str, np.ndarray], list[str]]:
    """Return ``({column: values}, comment lines)`` of a table written by :func:`write_table`.

    Numeric columns come back as float arrays (empty cells as NaN); any
    column holding text stays as strings.
    """
    lines = Path(path).read_text().splitlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not body:
        raise TraceFormatError(f"{path}: no table header")
    sep = "\t" if "\t" in body[0] else ","
    names = body[0].split(sep)
    rows = [ln.split(sep) for ln in body[1:]]
    for n, row in enumerate(rows, 2):
        if len(row) != len(names):
            raise TraceFormatError(f"{path}: table row {n} has {len(row)} cells, "
                                   f"expected {len(names)}")
    return {name: _column([r[k] for r in rows]) for k, name in enumerate(names)}, comments


SWEEP_COLUMNS = ["i_ab", "i_be", "delta_i", "delta_i_per_second", "chi", "eps", "eps_e",
                 "eps_overlap_in", "n_lo_out", "n_ele_out"]


def sweep_rows(sweep) -> tuple[list[str], list[list]]:
    axis_col = {"repetition": "repetition_hz", "cmrr": "cmrr_db", "lo": "lo_photons",
                "distance": "distance_km"}.get(sweep.axis, sweep.axis)
    extra_cols = [k for k in sweep.extra if k not in ("eps_overlap", "n_lo")]
    columns = [axis_col] + SWEEP_COLUMNS + extra_cols
    rows = []
    for k, (x, r) in enumerate(sweep.points):
        b = r.budget
        rows.append([x, r.i_ab, r.i_be, r.delta_i, r.delta_i_per_second, r.chi, r.eps, r.eps_e,
                     b.eps_overlap, b.n_lo, b.n_ele] + [float(sweep.extra[c][k]) for c in extra_cols])
    return columns, rows


def sweep_summary(sweep) -> list[str]:
    lines = [f"axis = {sweep.axis} [{sweep.unit}]", f"objective = {sweep.objective}",
             f"argmax = {sweep.argmax!r}", f"max = {sweep.max_value!r}"]
    for root, (lo, hi) in sweep.zero_crossings:
        lines.append(f"zero_crossing = {root!r} (bracket {lo!r} .. {hi!r})")
    for name, value in sweep.thresholds.items():
        lines.append(f"{name} = {value!r}")
    return lines


def write_sweep(path, sweep, metadata: list[str] | None = None, fmt: str = "csv") -> None:
    columns, rows = sweep_rows(sweep)
    write_table(path, columns, rows, list(metadata or []) + sweep_summary(sweep), fmt)


def read_xy(path) -> tuple[np.ndarray, np.ndarray]:
    """First two numeric columns, with optional ``#`` comments and a column-name header."""
    times, values, _ = read_trace_columns(path, ncols=None)
    return times, values
