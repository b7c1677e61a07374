"""Reverse-reconciliation secret key rate under individual attacks."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    ChannelParams,
    ModulationParams,
    NoiseBudget,
    ReceiverParams,
    SystemParams,
    build_noise_budget,
    equivalent_input_noise,
)


class InconsistentParameters(ValueError):
    """A logarithm argument in the key-rate formulas is not positive."""


@dataclass(frozen=True)
class KeyRateResult:
    i_ab: float
    i_be: float
    delta_i: float
    delta_i_per_second: float | None
    chi: float
    eps: float
    eps_e: float
    budget: NoiseBudget
    beta: float

    @property
    def has_key(self) -> bool:
        return self.delta_i > 0


def mutual_information_ab(v_a: ModulationParams | float, chi: float) -> float:
    """Alice-Bob Shannon information in bits per pulse."""
    va = v_a.v_a if isinstance(v_a, ModulationParams) else v_a
    if chi < 0:
        raise ValueError(f"chi must be >= 0, got {chi}")
    if math.isinf(chi):
        return 0.0
    v = va + 1.0
    return 0.5 * math.log2((v + chi) / (1.0 + chi))


def eve_information(v_a: ModulationParams | float, channel: ChannelParams,
                    rx: ReceiverParams, eps_e: float, n_bob: float, eps: float) -> float:
    """Bob-Eve information in bits per pulse for reverse reconciliation.

    ``n_bob`` is the output-referred electronic noise; ``eps`` is the full
    input-referred excess noise and ``eps_e`` its eavesdropper-controlled part.
    """
    va = v_a.v_a if isinstance(v_a, ModulationParams) else v_a
    v = va + 1.0
    g, eta = channel.g, rx.eta
    inner = 1.0 - g + g * eps_e + g / v
    if not inner > 0:
        raise InconsistentParameters(
            f"1 - G + G*eps_E + G/V = {inner!r} is not positive (G={g}, eps_E={eps_e}, V={v})")
    denominator = eta / inner + 1.0 - eta + n_bob
    if not denominator > 0:
        raise InconsistentParameters(
            f"eta/(1 - G + G*eps_E + G/V) + 1 - eta + N_Bob = {denominator!r} is not positive")
    numerator = eta * g * va + 1.0 + eta * g * eps
    if not numerator > 0:
        raise InconsistentParameters(f"eta*G*V_A + 1 + eta*G*eps = {numerator!r} is not positive")
    return 0.5 * math.log2(numerator / denominator)


def key_rate_from_budget(modulation: ModulationParams, channel: ChannelParams,
                         rx: ReceiverParams, budget: NoiseBudget,
                         repetition_hz: float | None = None) -> KeyRateResult:
    chi, eps, eps_e = equivalent_input_noise(budget, channel, rx)
    i_ab = mutual_information_ab(modulation, chi)
    i_be = eve_information(modulation, channel, rx, eps_e, budget.n_ele, eps)
    delta_i = rx.beta * i_ab - i_be
    per_second = delta_i * repetition_hz if repetition_hz is not None else None
    return KeyRateResult(i_ab, i_be, delta_i, per_second, chi, eps, eps_e, budget, rx.beta)


def secret_key_rate(params: SystemParams) -> KeyRateResult:
    """Key rate for a full operating point.

    Negative ``delta_i`` is returned unchanged so callers can locate the
    point where the key vanishes.
    """
    try:
        budget = build_noise_budget(params)
        return key_rate_from_budget(params.modulation, params.channel, params.receiver,
                                    budget, params.repetition_hz)
    except ValueError as exc:
        context = (f"V_A={params.modulation.v_a}, G={params.channel.g}, "
                   f"eta={params.receiver.eta}, R={params.repetition_hz}")
        raise type(exc)(f"{exc} [{context}]") from exc
