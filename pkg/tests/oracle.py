"""Monolithic high-precision re-evaluation of the key-rate chain.

Deliberately shares no code with ``gmcs_bhd``: every formula is typed in
again here with mpmath at 50 digits so the package can be checked against
an independent route.
"""
import mpmath as mp

mp.mp.dps = 50


def key_rate(va, g, eta, beta, eps_a=0, n_ele=0, n_leak=0,
             eps_overlap=None, bandwidth_hz=None, repetition_hz=None,
             n_lo=None, i_lo=None, f=None, delta=None, cmrr_db=None):
    """Return a dict with chi, eps, eps_e, i_ab, i_be, delta_i, per_second."""
    va, g, eta, beta = map(mp.mpf, (va, g, eta, beta))
    v = va + 1
    if eps_overlap is None:
        if bandwidth_hz is not None and repetition_hz is not None:
            b, r = mp.mpf(bandwidth_hz), mp.mpf(repetition_hz)
            eps_overlap = 2 * v * mp.e ** (-(b ** 2) / r ** 2)
        else:
            eps_overlap = 0
    if n_lo is None:
        if cmrr_db is not None:
            delta = mp.mpf(10) ** (-mp.mpf(cmrr_db) / 20) / 2
        if delta is not None and f is not None:
            n_lo = mp.mpf(i_lo) * mp.mpf(f) ** 2 * mp.mpf(delta) ** 2
        else:
            n_lo = 0
    eps_overlap, n_lo = mp.mpf(eps_overlap), mp.mpf(n_lo)
    eps_a, n_ele, n_leak = mp.mpf(eps_a), mp.mpf(n_ele), mp.mpf(n_leak)
    eg = eta * g
    eps_e = eps_a + eps_overlap + n_lo / eg + n_leak / eg
    eps = eps_e + n_ele / eg
    chi = (1 - eg) / eg + eps_e + n_ele / eg
    i_ab = mp.log((v + chi) / (1 + chi), 2) / 2
    num = eg * va + 1 + eg * eps
    den = eta / (1 - g + g * eps_e + g / v) + 1 - eta + n_ele
    i_be = mp.log(num / den, 2) / 2
    d = beta * i_ab - i_be
    out = dict(chi=chi, eps=eps, eps_e=eps_e, i_ab=i_ab, i_be=i_be, delta_i=d)
    if repetition_hz is not None:
        out["per_second"] = d * mp.mpf(repetition_hz)
    return out
