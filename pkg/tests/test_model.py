from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmcs_bhd.model import (
    BhdParams,
    ChannelParams,
    LoParams,
    ModulationParams,
    NoiseBudget,
    ReceiverParams,
    SplitterGains,
    SystemParams,
    build_noise_budget,
    cmrr_from_delta,
    delta_from_cmrr,
    electronic_noise,
    equivalent_input_noise,
    imbalance_delta,
    lo_fluctuation_noise,
    lo_fluctuation_noise_empirical,
    near_balanced_delta,
    nlo_route,
    overlap_noise,
    overlap_noise_from_cc,
    shot_to_electronic_db,
)

# Frozen from the mpmath oracle (tests/oracle.py).
OVERLAP_36MHZ = 0.015953109922194176
DELTA_46DB = 0.0025059361681363614
NLO_TABLE1_PHYSICAL = 0.53377586669578577  # 8.5e8 photons, f = 1%, 46 dB


def _system(**kw):
    base = dict(modulation=ModulationParams(16.9), channel=ChannelParams(0.758),
                receiver=ReceiverParams(0.44, 0.898))
    base.update(kw)
    return SystemParams(**base)


class TestParameterValidation:
    @pytest.mark.parametrize("va", [0.0, -1.0])
    def test_modulation_variance_positive(self, va):
        with pytest.raises(ValueError):
            ModulationParams(va)

    @pytest.mark.parametrize("g", [0.0, 1.5, -0.1])
    def test_transmittance_range(self, g):
        with pytest.raises(ValueError):
            ChannelParams(g)

    def test_from_distance(self):
        ch = ChannelParams.from_distance(10.0, 0.2)
        assert ch.g == pytest.approx(10 ** -0.2, rel=1e-15)
        assert ChannelParams.from_distance(0.0, 0.2).g == 1.0

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            ChannelParams.from_distance(-1.0, 0.2)

    @pytest.mark.parametrize("eta,beta", [(0.0, 0.9), (1.1, 0.9), (0.5, 0.0), (0.5, 1.2)])
    def test_receiver_ranges(self, eta, beta):
        with pytest.raises(ValueError):
            ReceiverParams(eta, beta)

    def test_lo_photons_positive(self):
        with pytest.raises(ValueError):
            LoParams(0.0)
        with pytest.raises(ValueError):
            LoParams(1e8, -0.01)

    def test_splitter_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SplitterGains(0.6, 0.5)
        with pytest.raises(ValueError):
            SplitterGains(0.5, 0.5, g1=0.0)

    def test_only_one_imbalance_form(self):
        with pytest.raises(ValueError):
            BhdParams(100e6, delta=0.01, cmrr_db=40.0)

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            NoiseBudget(eps_a=-0.1)

    def test_bad_nlo_path(self):
        with pytest.raises(ValueError):
            _system(nlo_path="guess")


class TestOverlap:
    def test_frozen_value(self):
        assert overlap_noise(16.9, 100e6, 36e6) == pytest.approx(OVERLAP_36MHZ, rel=1e-13)

    def test_vanishes_far_below_bandwidth(self):
        assert overlap_noise(16.9, 100e6, 20e6) < 1e-6

    def test_from_cc_neighbors(self):
        one = overlap_noise_from_cc(16.9, 0.051, neighbors=1)
        two = overlap_noise_from_cc(16.9, 0.051, neighbors=2)
        assert one == pytest.approx(17.9 * 0.051 ** 2)
        assert two == pytest.approx(2 * one)

    def test_from_cc_rejects_bad_input(self):
        with pytest.raises(ValueError):
            overlap_noise_from_cc(16.9, 1.2)
        with pytest.raises(ValueError):
            overlap_noise_from_cc(16.9, 0.1, neighbors=3)

    @given(st.floats(1.0, 100.0), st.floats(1e6, 1e9), st.floats(1e5, 1e9))
    def test_monotone_in_repetition(self, va, bw, r):
        assert overlap_noise(va, bw, r) <= overlap_noise(va, bw, r * 1.1)


class TestImbalance:
    def test_balanced_is_zero(self):
        assert imbalance_delta(0.5, 0.5) == 0.0
        assert cmrr_from_delta(0.0) == math.inf
        assert delta_from_cmrr(math.inf) == 0.0

    def test_cmrr_46db(self):
        assert delta_from_cmrr(46.0) == pytest.approx(DELTA_46DB, rel=1e-14)

    def test_sign_ignored_by_cmrr(self):
        assert cmrr_from_delta(-0.01) == cmrr_from_delta(0.01)

    def test_gain_imbalance(self):
        d = imbalance_delta(0.5, 0.5, 1.02, 0.98)
        assert d == pytest.approx(0.02 / math.sqrt(0.5 * (1.02 ** 2 + 0.98 ** 2)), rel=1e-14)

    def test_near_balanced_matches_to_first_order(self):
        opt, ele = near_balanced_delta(0.501, 0.499, 1.001, 0.999)
        exact = imbalance_delta(0.501, 0.499, 1.001, 0.999)
        assert opt + ele == pytest.approx(exact, rel=1e-5)

    def test_nan_cmrr_rejected(self):
        with pytest.raises(ValueError):
            delta_from_cmrr(math.nan)

    @given(st.floats(1e-9, 0.49))
    def test_round_trip(self, delta):
        assert delta_from_cmrr(cmrr_from_delta(delta)) == pytest.approx(delta, rel=1e-9)

    @given(st.floats(0.0, 1.0), st.floats(0.1, 10.0), st.floats(0.1, 10.0))
    def test_delta_bounded(self, t2, g1, g2):
        assert abs(imbalance_delta(t2, 1.0 - t2, g1, g2)) <= 1.0 + 1e-12


class TestLoAndElectronicNoise:
    def test_physical_nlo(self):
        lo = LoParams(8.5e8, 0.01)
        assert lo_fluctuation_noise(lo, DELTA_46DB) == pytest.approx(NLO_TABLE1_PHYSICAL, rel=1e-13)

    def test_zero_limits(self):
        assert lo_fluctuation_noise(LoParams(1e8, 0.0), 0.01) == 0.0
        assert lo_fluctuation_noise(LoParams(1e8, 0.01), 0.0) == 0.0

    def test_fluctuation_required(self):
        with pytest.raises(ValueError):
            lo_fluctuation_noise(LoParams(1e8), 0.01)

    def test_empirical(self):
        assert lo_fluctuation_noise_empirical(LoParams(8.5e8), 1.1e-10) == pytest.approx(0.0935)

    def test_electronic(self):
        assert electronic_noise(LoParams(8.5e8), 4.0e7) == pytest.approx(0.047059, rel=1e-4)
        assert electronic_noise(8.5e8, 4.0e7) == electronic_noise(LoParams(8.5e8), 4.0e7)
        with pytest.raises(ValueError):
            electronic_noise(0.0, 4.0e7)

    def test_shot_to_electronic(self):
        assert shot_to_electronic_db(4.0e7 / 8.5e8) == pytest.approx(13.27, abs=0.01)
        assert shot_to_electronic_db(0.0) == math.inf


class TestBudget:
    def test_referral(self):
        b = NoiseBudget(eps_a=0.1, eps_overlap=0.2, n_lo=0.3, n_ele=0.4, n_leak=0.5)
        eg = 0.25
        rows = {name: (i, o) for name, i, o in b.table(eg)}
        assert rows["eps_a"] == pytest.approx((0.1, 0.025))
        assert rows["n_lo"] == pytest.approx((1.2, 0.3))
        assert rows["n_ele"] == pytest.approx((1.6, 0.4))

    def test_equivalent_noise(self):
        b = NoiseBudget(eps_a=0.056, eps_overlap=0.044, n_lo=0.0935, n_ele=0.047)
        ch, rx = ChannelParams(0.758), ReceiverParams(0.44)
        eg = 0.758 * 0.44
        chi, eps, eps_e = equivalent_input_noise(b, ch, rx)
        assert eps_e == pytest.approx(0.1 + 0.0935 / eg)
        assert eps == pytest.approx(eps_e + 0.047 / eg)
        assert chi == pytest.approx((1 - eg) / eg + eps)

    def test_fixed_values_win(self):
        p = _system(bhd=BhdParams(100e6, electronic_noise_coeff=4e7, nlo_empirical_coeff=1e-10),
                    lo=LoParams(1e8), repetition_hz=36e6,
                    eps_overlap_fixed=0.01, n_ele_fixed=0.02, n_lo_fixed=0.03)
        b = build_noise_budget(p)
        assert (b.eps_overlap, b.n_ele, b.n_lo) == (0.01, 0.02, 0.03)

    def test_derived_values(self):
        p = _system(bhd=BhdParams(100e6, electronic_noise_coeff=4e7, cmrr_db=46.0),
                    lo=LoParams(8.5e8, 0.01), repetition_hz=36e6)
        b = build_noise_budget(p)
        assert b.eps_overlap == pytest.approx(OVERLAP_36MHZ, rel=1e-13)
        assert b.n_lo == pytest.approx(NLO_TABLE1_PHYSICAL, rel=1e-13)
        assert b.n_ele == pytest.approx(4e7 / 8.5e8)

    def test_electronic_coeff_needs_lo(self):
        with pytest.raises(ValueError):
            build_noise_budget(_system(bhd=BhdParams(100e6, electronic_noise_coeff=4e7)))


class TestNloRoute:
    def test_auto_prefers_physical(self):
        bhd = BhdParams(100e6, nlo_empirical_coeff=1e-10, delta=0.01)
        assert nlo_route(_system(bhd=bhd, lo=LoParams(1e8, 0.01))) == "physical"
        assert nlo_route(_system(bhd=bhd, lo=LoParams(1e8))) == "empirical"

    def test_none_without_inputs(self):
        assert nlo_route(_system()) is None

    def test_forced_path_must_be_complete(self):
        with pytest.raises(ValueError):
            nlo_route(_system(bhd=BhdParams(100e6), lo=LoParams(1e8), nlo_path="physical"))
        with pytest.raises(ValueError):
            nlo_route(_system(bhd=BhdParams(100e6, delta=0.01), lo=LoParams(1e8, 0.01),
                              nlo_path="empirical"))
