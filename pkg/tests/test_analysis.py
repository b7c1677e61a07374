from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmcs_bhd.analysis import (
    QuadraticFit,
    decompose_noise,
    fit_quadratic,
    golden_section_max,
    optimize_lo,
    shot_to_electronic_ratio_db,
    sweep_cmrr,
    sweep_distance,
    sweep_lo,
    sweep_repetition,
)
from gmcs_bhd.config import load_config
from gmcs_bhd.model import BhdParams, LoParams


class TestQuadraticFit:
    def test_exact_parabola(self):
        x = np.array([0.0, 1e8, 3e8, 5e8, 8.5e8])
        y = 8e-20 * x ** 2 + 7e-10 * x + 0.028
        fit = fit_quadratic(x=x, y=y)
        assert fit.coefficients == pytest.approx((8e-20, 7e-10, 0.028), rel=1e-9)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit(2e8) == pytest.approx(8e-20 * 4e16 + 0.14 + 0.028)

    def test_points_form(self):
        fit = fit_quadratic([(0, 1), (1, 2), (2, 5)])
        assert fit.coefficients == pytest.approx((1.0, 0.0, 1.0), abs=1e-12)
        assert fit.stderr == (0.0, 0.0, 0.0)
        assert fit.n == 3

    def test_matches_numpy_polyfit(self):
        rng = np.random.default_rng(3)
        x = np.linspace(0, 10, 30)
        y = 0.3 * x ** 2 - 2 * x + 1 + rng.normal(0, 0.5, x.size)
        fit = fit_quadratic(x=x, y=y)
        ref, cov = np.polyfit(x, y, 2, cov="unscaled")
        assert fit.coefficients == pytest.approx(tuple(ref), rel=1e-9)
        resid = y - np.polyval(ref, x)
        se = np.sqrt(np.diag(cov) * (resid @ resid) / (x.size - 3))
        assert fit.stderr == pytest.approx(tuple(se), rel=1e-6)
        r2 = 1 - (resid @ resid) / np.sum((y - y.mean()) ** 2)
        assert fit.r_squared == pytest.approx(r2, rel=1e-12)

    def test_too_few_distinct_x(self):
        with pytest.raises(ValueError, match="3 distinct"):
            fit_quadratic(x=[1.0, 1.0, 2.0, 2.0], y=[1.0, 2.0, 3.0, 4.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            fit_quadratic(x=[1.0, 2.0, 3.0], y=[1.0, 2.0])
        with pytest.raises(ValueError):
            fit_quadratic([(1, 2, 3)])

    def test_constant_data(self):
        fit = fit_quadratic(x=[1.0, 2.0, 3.0, 4.0], y=[5.0] * 4)
        assert fit.r_squared == 1.0
        assert fit.c == pytest.approx(5.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(1e-3, 1e9))
    def test_recovers_coefficients_at_any_scale(self, a, b, c, scale):
        x = np.linspace(0, 1, 7) * scale
        y = a / scale ** 2 * x ** 2 + b / scale * x + c
        fit = fit_quadratic(x=x, y=y)
        assert fit.a * scale ** 2 == pytest.approx(a, abs=1e-8)
        assert fit.b * scale == pytest.approx(b, abs=1e-8)
        assert fit.c == pytest.approx(c, abs=1e-8)


class TestDecomposition:
    def test_values(self):
        fit = QuadraticFit(8.0e-20, 7.0e-10, 0.028, 1.0, (0, 0, 0), 5)
        c_ele, c_lo = decompose_noise(fit)
        assert c_ele == pytest.approx(4.0e7)
        assert c_lo == pytest.approx(1.142857e-10, rel=1e-6)
        assert shot_to_electronic_ratio_db(fit, 8.5e8) == pytest.approx(13.27, abs=0.01)

    def test_nonpositive_linear_term(self):
        with pytest.raises(ValueError):
            decompose_noise(QuadraticFit(1.0, 0.0, 1.0, 1.0, (0, 0, 0), 3))

    def test_ratio_without_electronics(self):
        assert shot_to_electronic_ratio_db(QuadraticFit(0, 1, 0, 1, (0, 0, 0), 3), 1e8) == math.inf


class TestGoldenSection:
    @settings(max_examples=50, deadline=None)
    @given(st.floats(-10, 10))
    def test_parabola(self, peak):
        x, fx = golden_section_max(lambda t: -(t - peak) ** 2, -20, 20, 1e-9)
        assert x == pytest.approx(peak, abs=1e-8)
        assert fx == pytest.approx(0.0, abs=1e-15)

    def test_monotone_goes_to_edge(self):
        x, _ = golden_section_max(lambda t: t, 0.0, 1.0, 1e-9)
        assert x == pytest.approx(1.0, abs=1e-8)

    def test_empty_interval(self):
        with pytest.raises(ValueError):
            golden_section_max(lambda t: t, 1.0, 1.0, 1e-9)


class TestSweeps:
    def test_repetition_sweep_shape(self):
        res = sweep_repetition(load_config("fig2.cfg").system_params(), np.linspace(1e6, 60e6, 60))
        assert res.axis == "repetition" and res.objective == "per_second"
        assert len(res.results) == 60
        assert res.max_value >= res.values.max()
        assert "cutoff" in res.thresholds
        assert res.extra["eps_overlap"][0] < 1e-100
        assert res.last_positive < res.thresholds["cutoff"]

    def test_repetition_requires_bandwidth(self):
        p = dataclasses.replace(load_config("fig2.cfg").system_params(), bhd=None)
        with pytest.raises(ValueError):
            sweep_repetition(p)

    def test_repetition_rejects_zero_rate(self):
        with pytest.raises(ValueError):
            sweep_repetition(load_config("fig2.cfg").system_params(), [0.0, 1e6])

    def test_cmrr_sweep_monotone(self):
        res = sweep_cmrr(load_config("fig3.cfg").system_params(), np.linspace(30, 80, 51))
        assert np.all(np.diff(res.values) >= -1e-15)
        assert res.thresholds["positive"] < res.thresholds["ninety_percent"]
        assert res.extra["n_lo"][0] > res.extra["n_lo"][-1]

    def test_cmrr_needs_fluctuation(self):
        p = load_config("fig3.cfg").system_params()
        with pytest.raises(ValueError):
            sweep_cmrr(dataclasses.replace(p, lo=LoParams(1e8)))

    def test_lo_sweep_peak_near_optimum(self):
        p = load_config("fig8.cfg").system_params()
        res = sweep_lo(p, np.logspace(7, 9, 41))
        best = optimize_lo(p)
        assert res.argmax == pytest.approx(best.i_lo, rel=1e-2)

    def test_lo_sweep_rejects_fixed_noise(self):
        p = load_config("fig2.cfg").system_params()
        with pytest.raises(ValueError):
            sweep_lo(p)

    def test_distance_sweep(self):
        p = load_config("fig9.cfg").system_params()
        res = sweep_distance(p, np.linspace(0, 30, 31), 0.21)
        assert res.values[0] > res.values[10] > 0
        assert "max_distance" in res.thresholds
        assert res.extra["transmittance"][0] == 1.0
        assert np.all(res.extra["lo_photons"] > 0)

    def test_distance_without_optimisation_keeps_lo(self):
        p = load_config("fig9.cfg").system_params()
        res = sweep_distance(p, [0.0, 5.0, 10.0], 0.21, optimize=False)
        assert "lo_photons" not in res.extra
        assert all(r.budget.n_ele == pytest.approx(4e7 / 1.3e8) for r in res.results)

    @pytest.mark.parametrize("kw", [dict(loss_db_per_km=0.0), dict(distances_km=[-1.0, 1.0])])
    def test_distance_rejects(self, kw):
        p = load_config("fig9.cfg").system_params()
        with pytest.raises(ValueError):
            sweep_distance(p, **kw)

    def test_sweep_with_no_key_anywhere(self):
        p = load_config("fig2.cfg").system_params()
        p = dataclasses.replace(p, eps_a=1.0)
        res = sweep_repetition(p, np.linspace(1e6, 60e6, 20))
        assert res.max_value < 0
        assert res.zero_crossings == []
        assert res.last_positive is None


class TestOptimizeLo:
    def test_interior_optimum(self):
        best = optimize_lo(load_config("fig8.cfg").system_params())
        assert not best.monotone
        assert 1e8 < best.i_lo < 2e8

    def test_monotone_objective_hits_boundary(self):
        p = load_config("fig8.cfg").system_params()
        bhd = dataclasses.replace(p.bhd, nlo_empirical_coeff=0.0)
        best = optimize_lo(dataclasses.replace(p, bhd=bhd), (1e6, 1e10))
        assert best.monotone
        assert best.i_lo == pytest.approx(1e10)

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            optimize_lo(load_config("fig8.cfg").system_params(), (1e9, 1e8))

    def test_needs_detector(self):
        p = dataclasses.replace(load_config("fig8.cfg").system_params(), bhd=None)
        with pytest.raises(ValueError):
            optimize_lo(p)

    def test_physical_path(self):
        p = load_config("fig8.cfg").system_params()
        bhd = BhdParams(100e6, electronic_noise_coeff=4e7, cmrr_db=46.0)
        best = optimize_lo(dataclasses.replace(p, bhd=bhd, lo=LoParams(1e8, 0.01)))
        assert best.result.budget.n_lo == pytest.approx(
            best.i_lo * 1e-4 * (10 ** (-46 / 20) / 2) ** 2, rel=1e-12)
