"""Quadratic noise decomposition, parameter sweeps and LO optimisation."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .keyrate import KeyRateResult, secret_key_rate
from .model import ChannelParams, LoParams, SystemParams, nlo_route

DEFAULT_POINTS = 200
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class QuadraticFit:
    """Least-squares fit ``y = a x^2 + b x + c``."""

    a: float
    b: float
    c: float
    r_squared: float
    stderr: tuple[float, float, float]
    n: int

    def __call__(self, x):
        return self.a * np.square(x) + self.b * np.asarray(x) + self.c

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return self.a, self.b, self.c


def fit_quadratic(points=None, *, x=None, y=None) -> QuadraticFit:
    """Fit a parabola to ``[(x, y), ...]`` (or to ``x=``, ``y=`` arrays).

    The abscissa is rescaled to unit magnitude before solving, which keeps the
    design matrix well conditioned for x spanning ~1e9 photons. Standard
    errors come from the residual variance; with exactly three points they
    are zero.
    """
    if points is not None:
        arr = np.asarray(list(points), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("points must be (x, y) pairs")
        x, y = arr[:, 0], arr[:, 1]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if np.unique(x).size < 3:
        raise ValueError("a quadratic fit needs at least 3 distinct x values")
    n = x.size
    scale = float(np.max(np.abs(x))) or 1.0
    u = x / scale
    design = np.column_stack([u * u, u, np.ones_like(u)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise ValueError("design matrix is rank deficient")
    resid = y - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    if n > 3:
        cov = np.linalg.inv(design.T @ design) * (ss_res / (n - 3))
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    else:
        se = np.zeros(3)
    unscale = np.array([1.0 / scale ** 2, 1.0 / scale, 1.0])
    a, b, c = coef * unscale
    se = se * unscale
    return QuadraticFit(float(a), float(b), float(c), r2, tuple(float(s) for s in se), n)


def decompose_noise(fit: QuadraticFit) -> tuple[float, float]:
    """Split a variance-vs-LO fit into ``(c_ele, c_lo)`` in shot-noise units.

    The linear term is the shot noise; ``N_ele = c_ele / I_LO`` with
    ``c_ele = c / b`` and ``N_LO = c_lo * I_LO`` with ``c_lo = a / b``.
    """
    if not fit.b > 0:
        raise ValueError(f"linear (shot-noise) coefficient must be > 0, got {fit.b}")
    return fit.c / fit.b, fit.a / fit.b


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       xtol: float) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    if not hi > lo:
        raise ValueError("empty search interval")
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > xtol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


@dataclass
class SweepResult:
    """Key rate evaluated along one parameter axis."""

    axis: str
    unit: str
    objective: str
    xs: np.ndarray
    results: list[KeyRateResult]
    argmax: float
    max_value: float
    zero_crossings: list[tuple[float, tuple[float, float]]] = field(default_factory=list)
    thresholds: dict[str, float] = field(default_factory=dict)
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    params: SystemParams | None = None

    @property
    def points(self) -> list[tuple[float, KeyRateResult]]:
        return list(zip(self.xs.tolist(), self.results))

    @property
    def values(self) -> np.ndarray:
        return np.array([_objective(r, self.objective) for r in self.results])

    @property
    def grid_argmax(self) -> float:
        return float(self.xs[int(np.argmax(self.values))])

    @property
    def last_positive(self) -> float | None:
        pos = self.xs[self.values > 0]
        return float(pos[-1]) if pos.size else None


def _objective(result: KeyRateResult, objective: str) -> float:
    if objective == "per_second":
        if result.delta_i_per_second is None:
            raise ValueError("per-second objective needs a repetition rate")
        return result.delta_i_per_second
    return result.delta_i


def _run_sweep(axis, unit, objective, xs, evaluate, params, extra_fn=None):
    xs = np.asarray(sorted(float(x) for x in xs))
    if xs.size == 0:
        raise ValueError(f"empty {axis} range")

    def value(x):
        return _objective(evaluate(x), objective)

    results = [evaluate(x) for x in xs]
    vals = np.array([_objective(r, objective) for r in results])
    i = int(np.argmax(vals))
    best_x, best_v = float(xs[i]), float(vals[i])
    if 0 < i < xs.size - 1:
        lo, hi = float(xs[i - 1]), float(xs[i + 1])
        x, v = golden_section_max(value, lo, hi, 1e-6 * (hi - lo))
        if v >= best_v:
            best_x, best_v = x, v
    crossings = []
    for k in range(xs.size - 1):
        if (vals[k] > 0) != (vals[k + 1] > 0):
            lo, hi = float(xs[k]), float(xs[k + 1])
            if vals[k + 1] == 0:
                root = hi
            else:
                root = brentq(value, lo, hi, xtol=1e-12 * max(abs(hi), 1.0))
            crossings.append((float(root), (lo, hi)))
    extra = extra_fn(xs) if extra_fn else {}
    return SweepResult(axis, unit, objective, xs, results, best_x, best_v,
                       crossings, {}, extra, params)


def sweep_repetition(params: SystemParams, r_values=None) -> SweepResult:
    """Key rate per second versus laser repetition rate (Hz).

    Overlap noise is recomputed from the bandwidth at every rate; a fixed
    ``eps_overlap`` in ``params`` is ignored.
    """
    if params.bhd is None:
        raise ValueError("repetition sweep needs the detector bandwidth")
    if r_values is None:
        r_values = np.linspace(1e6, 60e6, DEFAULT_POINTS)
    if any(r <= 0 for r in r_values):
        raise ValueError("repetition rates must be > 0 Hz")
    base = dataclasses.replace(params, eps_overlap_fixed=None)

    def evaluate(r):
        return secret_key_rate(dataclasses.replace(base, repetition_hz=r))

    def extra(xs):
        return {"eps_overlap": np.array([evaluate(x).budget.eps_overlap for x in xs])}

    res = _run_sweep("repetition", "Hz", "per_second", r_values, evaluate, base, extra)
    falling = [c for c, _ in res.zero_crossings if c > res.argmax]
    if falling:
        res.thresholds["cutoff"] = falling[0]
    return res


def _with_cmrr(params: SystemParams, cmrr_db: float) -> SystemParams:
    bhd = dataclasses.replace(params.bhd, delta=None, splitter=None, cmrr_db=cmrr_db)
    return dataclasses.replace(params, bhd=bhd, n_lo_fixed=None, nlo_path="physical")


def sweep_cmrr(params: SystemParams, cmrr_values=None) -> SweepResult:
    """Key rate per pulse versus detector CMRR (dB) at fixed LO level and fluctuation.

    ``thresholds`` holds ``positive`` (lowest CMRR with a key) and
    ``ninety_percent`` (lowest CMRR reaching 90% of the sweep maximum).
    """
    if params.lo is None or params.lo.fractional_fluctuation is None:
        raise ValueError("CMRR sweep needs the LO photon number and fractional fluctuation")
    if params.bhd is None:
        raise ValueError("CMRR sweep needs a [bhd] section")
    if cmrr_values is None:
        cmrr_values = np.linspace(30.0, 80.0, DEFAULT_POINTS)

    def evaluate(c):
        return secret_key_rate(_with_cmrr(params, c))

    def extra(xs):
        return {"n_lo": np.array([evaluate(x).budget.n_lo for x in xs])}

    res = _run_sweep("cmrr", "dB", "per_pulse", cmrr_values, evaluate, params, extra)
    rising = [c for c, _ in res.zero_crossings if c < res.argmax]
    if rising:
        res.thresholds["positive"] = rising[-1]
    target = 0.9 * res.max_value
    vals = res.values
    if res.max_value > 0:
        above = np.nonzero(vals >= target)[0]
        k = int(above[0])
        if k == 0:
            res.thresholds["ninety_percent"] = float(res.xs[0])
        else:
            lo, hi = float(res.xs[k - 1]), float(res.xs[k])
            res.thresholds["ninety_percent"] = brentq(
                lambda c: evaluate(c).delta_i - target, lo, hi, xtol=1e-10)
    return res


class LoOptimum(NamedTuple):
    i_lo: float
    result: KeyRateResult
    monotone: bool


def _lo_params(params: SystemParams, i_lo: float) -> SystemParams:
    f = params.lo.fractional_fluctuation if params.lo is not None else None
    return dataclasses.replace(params, lo=LoParams(i_lo, f))


def _check_lo_dependent(params: SystemParams):
    if params.bhd is None:
        raise ValueError("LO optimisation needs a [bhd] section with noise coefficients")
    if params.n_ele_fixed is not None or params.n_lo_fixed is not None:
        raise ValueError("LO optimisation needs LO-dependent N_ele and N_LO, "
                         "not fixed values")


def optimize_lo(params: SystemParams, lo_range=(1e6, 1e10), grid: int = 60,
                rel_tol: float = 1e-4) -> LoOptimum:
    """Maximise the per-pulse key rate over the LO photon number.

    A log-spaced grid brackets the optimum, then golden-section search in
    ``log I_LO`` refines it to ``rel_tol``. If the best grid point is a range
    boundary the objective is treated as monotone and that boundary is
    returned with ``monotone=True``.
    """
    lo, hi = (float(v) for v in lo_range)
    if not (0 < lo < hi) or grid < 3:
        raise ValueError(f"invalid LO range {lo_range!r}")
    _check_lo_dependent(params)

    def rate(log_i):
        return secret_key_rate(_lo_params(params, 10.0 ** log_i)).delta_i

    logs = np.linspace(math.log10(lo), math.log10(hi), grid)
    vals = np.array([rate(v) for v in logs])
    i = int(np.argmax(vals))
    if i in (0, grid - 1):
        edge = 10.0 ** logs[i]
        return LoOptimum(edge, secret_key_rate(_lo_params(params, edge)), True)
    x, _ = golden_section_max(rate, logs[i - 1], logs[i + 1], math.log10(1.0 + rel_tol) / 2)
    i_lo = 10.0 ** x
    return LoOptimum(i_lo, secret_key_rate(_lo_params(params, i_lo)), False)


def sweep_lo(params: SystemParams, lo_values=None) -> SweepResult:
    """Key rate per pulse versus LO photons per pulse."""
    _check_lo_dependent(params)
    if lo_values is None:
        lo_values = np.logspace(6, 10, DEFAULT_POINTS)
    if any(v <= 0 for v in lo_values):
        raise ValueError("LO photon numbers must be > 0")

    def evaluate(i):
        return secret_key_rate(_lo_params(params, i))

    return _run_sweep("lo", "photons/pulse", "per_pulse", lo_values, evaluate, params)


def _lo_is_free(params: SystemParams) -> bool:
    if params.bhd is None or params.n_ele_fixed is not None or params.n_lo_fixed is not None:
        return False
    try:
        lo_dependent_nlo = nlo_route(params) is not None
    except ValueError:
        lo_dependent_nlo = False
    return params.bhd.electronic_noise_coeff > 0 or lo_dependent_nlo


def sweep_distance(params: SystemParams, distances_km=None, loss_db_per_km: float = 0.21,
                   repetition_hz: float | None = None, optimize: bool = True,
                   lo_range=(1e6, 1e10)) -> SweepResult:
    """Key rate per second versus fiber length.

    With ``optimize`` (and LO-dependent detector noise) the LO level is
    re-optimised at every distance; the chosen level is kept in
    ``extra["lo_photons"]``. ``thresholds["max_distance"]`` is the last zero
    crossing of the rate.
    """
    if not loss_db_per_km > 0:
        raise ValueError("fiber loss must be > 0 dB/km")
    rep = repetition_hz if repetition_hz is not None else params.repetition_hz
    if rep is None:
        raise ValueError("distance sweep needs a repetition rate")
    if distances_km is None:
        distances_km = np.linspace(0.0, 40.0, DEFAULT_POINTS)
    if any(d < 0 for d in distances_km):
        raise ValueError("distances must be >= 0 km")
    base = dataclasses.replace(params, repetition_hz=rep)
    reoptimize = optimize and _lo_is_free(base)
    chosen_lo = {}

    def evaluate(d):
        p = dataclasses.replace(base, channel=ChannelParams.from_distance(d, loss_db_per_km))
        if reoptimize:
            best = optimize_lo(p, lo_range)
            chosen_lo[d] = best.i_lo
            return best.result
        return secret_key_rate(p)

    def extra(xs):
        out = {"transmittance": 10.0 ** (-loss_db_per_km * xs / 10.0)}
        if reoptimize:
            out["lo_photons"] = np.array([chosen_lo[float(x)] for x in xs])
        return out

    res = _run_sweep("distance", "km", "per_second", distances_km, evaluate, base, extra)
    falling = [c for c, _ in res.zero_crossings]
    if falling:
        res.thresholds["max_distance"] = falling[-1]
    return res


def shot_to_electronic_ratio_db(fit: QuadraticFit, lo_photons: float) -> float:
    """Ratio of the linear (shot) term to the constant (electronic) term in dB."""
    shot = fit.b * lo_photons
    if fit.c <= 0:
        return math.inf
    return 10.0 * math.log10(shot / fit.c)

