from __future__ import annotations

import math

import numpy as np
import pytest

from gmcs_bhd.analysis import sweep_repetition
from gmcs_bhd.config import load_config
from gmcs_bhd.fileio import (
    TraceFormatError,
    read_quadratures,
    read_table,
    read_trace,
    read_trace_columns,
    read_xy,
    segment_trace,
    write_quadratures,
    write_sweep,
    write_table,
    write_trace,
)
from gmcs_bhd.model import BhdParams
from gmcs_bhd.montecarlo import QuadratureSeries, SimConfig, integrate_quadratures, simulate_trace


def _sim(**kw):
    base = dict(bhd=BhdParams(100e6), lo_photons_per_pulse=1e8, n_pulses=60, seed=3,
                electronic_noise_rms_volts=1e-3)
    base.update(kw)
    return SimConfig(**base)


class TestTrace:
    def test_round_trip_reproduces_quadratures(self, tmp_path):
        cfg = _sim()
        trace = simulate_trace(cfg)
        path = tmp_path / "t.csv"
        write_trace(path, trace, cfg.repetition_hz, cfg.period_s / 2, ["origin = test"])
        back = read_trace(path)
        assert np.array_equal(back.pulse_starts, trace.pulse_starts)
        assert np.array_equal(integrate_quadratures(back).values, integrate_quadratures(trace).values)

    def test_truncated_write(self, tmp_path):
        cfg = _sim()
        trace = simulate_trace(cfg)
        path = tmp_path / "t.csv"
        write_trace(path, trace, cfg.repetition_hz, cfg.period_s / 2, n_pulses=10)
        back = read_trace(path)
        assert back.pulse_starts.size == 10
        assert np.array_equal(integrate_quadratures(back).values,
                              integrate_quadratures(trace).values[:10])

    def test_resegment_from_arguments(self, tmp_path):
        cfg = _sim()
        trace = simulate_trace(cfg)
        path = tmp_path / "t.csv"
        write_trace(path, trace, cfg.repetition_hz, cfg.period_s / 2)
        back = read_trace(path, repetition_hz=cfg.repetition_hz, window_s=10e-9)
        assert back.window_samples == 200
        assert back.pulse_starts.size == cfg.n_pulses

    def test_foreign_trace(self, tmp_path):
        t = np.arange(1000) * 1e-9
        v = np.sin(2 * np.pi * t / 100e-9)
        path = tmp_path / "scope.txt"
        path.write_text("time volts\n" + "\n".join(f"{a} {b}" for a, b in zip(t, v)))
        trace = read_trace(path, repetition_hz=10e6, window_s=50e-9)
        assert trace.pulse_starts.size == 10
        assert trace.window_samples == 50

    def test_foreign_trace_needs_rate(self, tmp_path):
        path = tmp_path / "scope.csv"
        path.write_text("0,1\n1e-9,2\n2e-9,3\n")
        with pytest.raises(TraceFormatError, match="repetition rate"):
            read_trace(path)

    def test_bad_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# c\ntime,volts\n0,1\n1e-9,x\n")
        with pytest.raises(TraceFormatError, match=r"bad.csv:4"):
            read_trace_columns(path)
        path.write_text("0,1\n1e-9,2,3\n")
        with pytest.raises(TraceFormatError, match=r":2: expected 2 columns"):
            read_trace_columns(path)

    def test_too_short(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("0,1\n")
        with pytest.raises(TraceFormatError):
            read_trace_columns(path)

    def test_nonuniform_times(self):
        t = np.array([0.0, 1.0, 2.0, 4.0, 5.0])
        with pytest.raises(TraceFormatError, match="uniformly"):
            segment_trace(t, np.zeros(5), 0.5, 1.0)

    def test_no_complete_window(self):
        t = np.arange(10) * 1.0
        with pytest.raises(TraceFormatError, match="no complete"):
            segment_trace(t, np.zeros(10), 0.01, 8.0)


class TestTables:
    def test_quadratures_round_trip(self, tmp_path):
        q = QuadratureSeries(np.array([1.5e-12, -2.25e-12, math.pi]))
        write_quadratures(tmp_path / "q.txt", q, ["source = test"])
        assert np.array_equal(read_quadratures(tmp_path / "q.txt").values, q.values)

    @pytest.mark.parametrize("fmt", ["csv", "tsv"])
    def test_table_round_trip(self, tmp_path, fmt):
        path = tmp_path / f"t.{fmt}"
        write_table(path, ["x", "y"], [[1.0, 0.1], [2.0, None], [3.0, math.inf]], ["m = 1"], fmt)
        table, comments = read_table(path)
        assert list(table) == ["x", "y"]
        assert table["x"].tolist() == [1.0, 2.0, 3.0]
        assert table["y"][0] == 0.1
        assert math.isnan(table["y"][1]) and table["y"][2] == math.inf
        assert comments == ["m = 1"]

    def test_text_column_kept(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, ["name", "value"], [["a", 1.0], ["b", 2.5]])
        table, _ = read_table(path)
        assert table["name"].tolist() == ["a", "b"]
        assert table["value"].tolist() == [1.0, 2.5]

    def test_ragged_table(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n1,2\n3\n")
        with pytest.raises(TraceFormatError, match="row 3"):
            read_table(path)

    def test_sweep_file_keeps_negative_rates(self, tmp_path):
        res = sweep_repetition(load_config("fig2.cfg").system_params(), np.linspace(1e6, 60e6, 30))
        path = tmp_path / "s.csv"
        write_sweep(path, res, ["command: test"])
        table, comments = read_table(path)
        assert list(table)[0] == "repetition_hz"
        rate = table["delta_i_per_second"]
        assert rate.min() < 0
        assert np.array_equal(rate, res.values)
        assert any(c.startswith("cutoff = ") for c in comments)

    def test_read_xy_ignores_extra_columns(self, tmp_path):
        path = tmp_path / "xy.csv"
        path.write_text("# m\nlo,var,pred\n0,1,1\n1,2,2\n2,5,5\n")
        x, y = read_xy(path)
        assert x.tolist() == [0, 1, 2] and y.tolist() == [1, 2, 5]
