"""Domain types and closed-form noise formulas for a GMCS QKD link read out
by a practical balanced homodyne detector (BHD).

All noise values are in shot-noise units. ``eps_a`` and ``eps_overlap`` are
referred to the channel input; ``n_lo``, ``n_leak`` and ``n_ele`` are referred
to the detector output and are divided by ``eta * G`` when moved to the input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

SPLITTER_TOL = 1e-9


@dataclass(frozen=True)
class ModulationParams:
    """Alice's Gaussian modulation variance ``v_a`` (shot-noise units)."""

    v_a: float

    def __post_init__(self):
        if not self.v_a > 0:
            raise ValueError(f"modulation variance must be > 0, got {self.v_a}")

    @property
    def v(self) -> float:
        """Quadrature variance of the prepared state, ``v_a + 1``."""
        return self.v_a + 1.0


@dataclass(frozen=True)
class ChannelParams:
    """Channel transmittance, given directly or as fiber length and loss.

    Use :meth:`from_distance` for the fiber form; ``transmittance`` is then
    filled in from ``10 ** (-loss * L / 10)``.
    """

    transmittance: float
    distance_km: float | None = None
    loss_db_per_km: float | None = None

    def __post_init__(self):
        if not 0 < self.transmittance <= 1:
            raise ValueError(f"transmittance must be in (0, 1], got {self.transmittance}")

    @classmethod
    def from_distance(cls, distance_km: float, loss_db_per_km: float) -> "ChannelParams":
        if distance_km < 0:
            raise ValueError(f"distance must be >= 0 km, got {distance_km}")
        if loss_db_per_km < 0:
            raise ValueError(f"fiber loss must be >= 0 dB/km, got {loss_db_per_km}")
        g = 10.0 ** (-loss_db_per_km * distance_km / 10.0)
        return cls(g, distance_km, loss_db_per_km)

    @property
    def g(self) -> float:
        return self.transmittance


@dataclass(frozen=True)
class ReceiverParams:
    """Bob's total detection efficiency and the reconciliation efficiency."""

    eta: float
    beta: float = 1.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")


@dataclass(frozen=True)
class LoParams:
    """Local oscillator photons per pulse and relative RMS intensity fluctuation.

    ``fractional_fluctuation`` may be ``None`` when only an empirical N_LO
    coefficient is known.
    """

    photons_per_pulse: float
    fractional_fluctuation: float | None = None

    def __post_init__(self):
        if not self.photons_per_pulse > 0:
            raise ValueError(f"LO photons per pulse must be > 0, got {self.photons_per_pulse}")
        f = self.fractional_fluctuation
        if f is not None and f < 0:
            raise ValueError(f"LO fluctuation must be >= 0, got {f}")


@dataclass(frozen=True)
class SplitterGains:
    """Beam-splitter intensity ratios and time-integrated arm gains."""

    t2: float
    r2: float
    g1: float = 1.0
    g2: float = 1.0

    def __post_init__(self):
        _check_splitter(self.t2, self.r2, self.g1, self.g2)

    @property
    def delta(self) -> float:
        return imbalance_delta(self.t2, self.r2, self.g1, self.g2)


@dataclass(frozen=True)
class BhdParams:
    """Detector description.

    At most one of ``delta``, ``splitter`` or ``cmrr_db`` describes the
    subtraction imbalance. ``electronic_noise_coeff`` is ``c_ele`` with
    ``N_ele = c_ele / I_LO``; ``nlo_empirical_coeff`` is ``c_lo`` with
    ``N_LO = c_lo * I_LO``. ``pulse_width_s`` defaults to ``1 / bandwidth_hz``.
    """

    bandwidth_hz: float
    electronic_noise_coeff: float = 0.0
    nlo_empirical_coeff: float | None = None
    delta: float | None = None
    splitter: SplitterGains | None = None
    cmrr_db: float | None = None
    pulse_width_s: float | None = None

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError(f"bandwidth must be > 0 Hz, got {self.bandwidth_hz}")
        if self.electronic_noise_coeff < 0:
            raise ValueError("electronic noise coefficient must be >= 0")
        if self.nlo_empirical_coeff is not None and self.nlo_empirical_coeff < 0:
            raise ValueError("empirical N_LO coefficient must be >= 0")
        given = [x is not None for x in (self.delta, self.splitter, self.cmrr_db)]
        if sum(given) > 1:
            raise ValueError("give at most one of delta, splitter, cmrr_db")
        if self.pulse_width_s is not None and not self.pulse_width_s > 0:
            raise ValueError("pulse width must be > 0 s")

    def imbalance(self) -> float | None:
        """Resolved imbalance ``delta``, or ``None`` when none was configured."""
        if self.delta is not None:
            return self.delta
        if self.splitter is not None:
            return self.splitter.delta
        if self.cmrr_db is not None:
            return delta_from_cmrr(self.cmrr_db)
        return None

    @property
    def tau_s(self) -> float:
        return self.pulse_width_s if self.pulse_width_s is not None else 1.0 / self.bandwidth_hz


@dataclass(frozen=True)
class NoiseBudget:
    """Excess-noise ledger in shot-noise units.

    ``eps_a`` and ``eps_overlap`` are input-referred; ``n_lo``, ``n_leak`` and
    ``n_ele`` are output-referred.
    """

    eps_a: float = 0.0
    eps_overlap: float = 0.0
    n_lo: float = 0.0
    n_ele: float = 0.0
    n_leak: float = 0.0

    INPUT_REFERRED = ("eps_a", "eps_overlap")
    OUTPUT_REFERRED = ("n_lo", "n_leak", "n_ele")

    def __post_init__(self):
        for name in self.INPUT_REFERRED + self.OUTPUT_REFERRED:
            if getattr(self, name) < 0:
                raise ValueError(f"noise component {name} must be >= 0, got {getattr(self, name)}")

    def referred_to_input(self, name: str, eta_g: float) -> float:
        value = getattr(self, name)
        return value / eta_g if name in self.OUTPUT_REFERRED else value

    def referred_to_output(self, name: str, eta_g: float) -> float:
        value = getattr(self, name)
        return value if name in self.OUTPUT_REFERRED else value * eta_g

    def table(self, eta_g: float) -> list[tuple[str, float, float]]:
        """Rows of ``(component, input-referred, output-referred)``."""
        names = ("eps_a", "eps_overlap", "n_lo", "n_leak", "n_ele")
        return [(n, self.referred_to_input(n, eta_g), self.referred_to_output(n, eta_g))
                for n in names]


class EquivalentNoise(NamedTuple):
    chi: float
    eps: float
    eps_e: float


def _eta_g(channel: ChannelParams, rx: ReceiverParams) -> float:
    eta_g = rx.eta * channel.g
    if eta_g == 0:
        raise ValueError("eta * G is zero; a zero-transmission link has no key rate")
    return eta_g


def equivalent_input_noise(budget: NoiseBudget, channel: ChannelParams,
                           rx: ReceiverParams) -> EquivalentNoise:
    """Equivalent input noise ``chi`` with the excess-noise intermediates.

    ``eps_e`` is the part an eavesdropper may control (everything except the
    electronic noise), ``eps = eps_e + N_ele / (eta G)``, and
    ``chi = (1 - eta G) / (eta G) + eps``.
    """
    eta_g = _eta_g(channel, rx)
    eps_e = budget.eps_a + budget.eps_overlap + budget.n_lo / eta_g + budget.n_leak / eta_g
    n_bob = budget.n_ele
    eps = eps_e + n_bob / eta_g
    chi = (1.0 - eta_g) / eta_g + eps_e + n_bob / eta_g
    return EquivalentNoise(chi, eps, eps_e)


def overlap_noise(v_a: float, bandwidth_hz: float, repetition_hz: float) -> float:
    """Input-referred excess noise from neighbouring electrical pulses.

    Gaussian pulses of width ``1/B`` read at their peak; both neighbours
    contribute, giving ``2 (v_a + 1) exp(-B^2 / R^2)``.
    """
    if not bandwidth_hz > 0 or not repetition_hz > 0:
        raise ValueError("bandwidth and repetition rate must be > 0 Hz")
    return 2.0 * (v_a + 1.0) * math.exp(-(bandwidth_hz / repetition_hz) ** 2)


def overlap_noise_from_cc(v_a: float, cc: float, neighbors: int = 2) -> float:
    """Upper bound on overlap noise from the lag-1 quadrature correlation."""
    if abs(cc) > 1:
        raise ValueError(f"|cc| must be <= 1, got {cc}")
    if neighbors not in (1, 2):
        raise ValueError(f"neighbors must be 1 or 2, got {neighbors}")
    return neighbors * (v_a + 1.0) * cc * cc


def _check_splitter(t2, r2, g1, g2):
    if t2 < 0 or r2 < 0 or abs(t2 + r2 - 1.0) > SPLITTER_TOL:
        raise ValueError(f"t2 + r2 must equal 1 (got t2={t2}, r2={r2})")
    if not (g1 > 0 and g2 > 0):
        raise ValueError(f"arm gains must be > 0 (got g1={g1}, g2={g2})")


def imbalance_delta(t2: float, r2: float, g1: float = 1.0, g2: float = 1.0) -> float:
    """Normalised subtraction residual ``(g1 t2 - g2 r2) / sqrt(g1^2 t2 + g2^2 r2)``."""
    _check_splitter(t2, r2, g1, g2)
    return (g1 * t2 - g2 * r2) / math.sqrt(g1 * g1 * t2 + g2 * g2 * r2)


def near_balanced_delta(t2: float, r2: float, g1: float = 1.0,
                        g2: float = 1.0) -> tuple[float, float]:
    """Optical and electronic imbalance ``(t2 - r2, (g1 - g2) / (g1 + g2))``.

    Their sum only approximates :func:`imbalance_delta` near perfect balance.
    """
    _check_splitter(t2, r2, g1, g2)
    return t2 - r2, (g1 - g2) / (g1 + g2)


def cmrr_from_delta(delta: float) -> float:
    """Generalised CMRR in dB. Sign of ``delta`` is ignored; zero gives ``inf``."""
    d = abs(delta)
    if d == 0:
        return math.inf
    return -20.0 * math.log10(2.0 * d)


def delta_from_cmrr(cmrr_db: float) -> float:
    if cmrr_db == math.inf:
        return 0.0
    if math.isnan(cmrr_db) or cmrr_db == -math.inf:
        raise ValueError(f"CMRR must be finite or +inf, got {cmrr_db}")
    return 10.0 ** (-cmrr_db / 20.0) / 2.0


def lo_fluctuation_noise(lo: LoParams, delta: float) -> float:
    """Output-referred LO-fluctuation noise ``I_LO f^2 delta^2``."""
    f = lo.fractional_fluctuation
    if f is None:
        raise ValueError("LO fluctuation is not set; use the empirical N_LO coefficient instead")
    return lo.photons_per_pulse * f * f * delta * delta


def lo_fluctuation_noise_empirical(lo: LoParams, c_lo: float) -> float:
    return c_lo * lo.photons_per_pulse


def electronic_noise(lo: LoParams | float, c_ele: float) -> float:
    """Output-referred electronic noise ``c_ele / I_LO``."""
    i_lo = lo.photons_per_pulse if isinstance(lo, LoParams) else lo
    if not i_lo > 0:
        raise ValueError(f"LO photons per pulse must be > 0, got {i_lo}")
    return c_ele / i_lo


def shot_to_electronic_db(n_ele: float) -> float:
    """Shot-noise to electronic-noise ratio in dB for an output-referred N_ele."""
    return math.inf if n_ele == 0 else 10.0 * math.log10(1.0 / n_ele)


@dataclass(frozen=True)
class SystemParams:
    """One complete operating point.

    The ``*_fixed`` fields pin a noise component to a given value instead of
    deriving it (e.g. a measured ``eps_overlap`` or a quoted ``N_ele``).
    ``nlo_path`` is ``"auto"``, ``"physical"`` or ``"empirical"``.
    """

    modulation: ModulationParams
    channel: ChannelParams
    receiver: ReceiverParams
    bhd: BhdParams | None = None
    lo: LoParams | None = None
    repetition_hz: float | None = None
    eps_a: float = 0.0
    n_leak: float = 0.0
    eps_overlap_fixed: float | None = None
    n_ele_fixed: float | None = None
    n_lo_fixed: float | None = None
    nlo_path: str = "auto"

    def __post_init__(self):
        if self.repetition_hz is not None and not self.repetition_hz > 0:
            raise ValueError(f"repetition rate must be > 0 Hz, got {self.repetition_hz}")
        if self.nlo_path not in ("auto", "physical", "empirical"):
            raise ValueError(f"unknown N_LO path {self.nlo_path!r}")
        if self.eps_a < 0 or self.n_leak < 0:
            raise ValueError("eps_a and n_leak must be >= 0")

    @property
    def eta_g(self) -> float:
        return _eta_g(self.channel, self.receiver)


def _overlap_for(params: SystemParams) -> float:
    if params.eps_overlap_fixed is not None:
        return params.eps_overlap_fixed
    if params.repetition_hz is not None and params.bhd is not None:
        return overlap_noise(params.modulation.v_a, params.bhd.bandwidth_hz, params.repetition_hz)
    return 0.0


def _n_ele_for(params: SystemParams) -> float:
    if params.n_ele_fixed is not None:
        return params.n_ele_fixed
    if params.bhd is None or params.bhd.electronic_noise_coeff == 0:
        return 0.0
    if params.lo is None:
        raise ValueError("electronic noise coefficient needs the LO photon number")
    return electronic_noise(params.lo, params.bhd.electronic_noise_coeff)


def nlo_route(params: SystemParams) -> str | None:
    """Which N_LO evaluation applies: ``physical``, ``empirical`` or ``None``."""
    bhd, lo = params.bhd, params.lo
    physical_ok = (bhd is not None and lo is not None and bhd.imbalance() is not None
                   and lo.fractional_fluctuation is not None)
    empirical_ok = bhd is not None and lo is not None and bhd.nlo_empirical_coeff is not None
    if params.nlo_path == "physical":
        if not physical_ok:
            raise ValueError("physical N_LO path needs the LO photon number, fluctuation and imbalance")
        return "physical"
    if params.nlo_path == "empirical":
        if not empirical_ok:
            raise ValueError("empirical N_LO path needs the LO photon number and nlo coefficient")
        return "empirical"
    if physical_ok:
        return "physical"
    if empirical_ok:
        return "empirical"
    return None


def _n_lo_for(params: SystemParams) -> float:
    if params.n_lo_fixed is not None:
        return params.n_lo_fixed
    route = nlo_route(params)
    if route == "physical":
        return lo_fluctuation_noise(params.lo, params.bhd.imbalance())
    if route == "empirical":
        return lo_fluctuation_noise_empirical(params.lo, params.bhd.nlo_empirical_coeff)
    return 0.0


def build_noise_budget(params: SystemParams) -> NoiseBudget:
    """Assemble the excess-noise ledger for an operating point."""
    return NoiseBudget(
        eps_a=params.eps_a,
        eps_overlap=_overlap_for(params),
        n_lo=_n_lo_for(params),
        n_ele=_n_ele_for(params),
        n_leak=params.n_leak,
    )
