"""Time-domain Monte Carlo of a pulsed balanced homodyne detector.

Each LO pulse is split onto two photodiodes, photoelectrons are drawn from
Poisson statistics, the weighted difference is rendered as a Gaussian
voltage pulse, neighbouring tails superpose, white electronic noise is added
per sample, and quadratures are read out by integrating a window around each
pulse (or by taking the sample at the pulse peak).
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .model import BhdParams, SplitterGains

KERNEL_HALF_WIDTH_TAU = 7.0
MAX_TRUNCATION_BIAS = 1e-6
READOUTS = ("window", "peak")


def splitter_for_delta(delta: float) -> SplitterGains:
    """Unit-gain splitter whose imbalance equals ``delta`` exactly."""
    if abs(delta) >= 1:
        raise ValueError(f"|delta| must be < 1 for a splitter representation, got {delta}")
    return SplitterGains((1.0 + delta) / 2.0, (1.0 - delta) / 2.0, 1.0, 1.0)


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulated pulse train.

    ``lo_photons_per_pulse`` may be zero (electronics only). The imbalance is
    taken from ``bhd.splitter`` when present, otherwise from ``bhd.imbalance()``
    mapped onto a unit-gain splitter.
    """

    bhd: BhdParams
    lo_photons_per_pulse: float
    lo_fluctuation: float = 0.0
    repetition_hz: float = 32e6
    sample_rate_hz: float = 20e9
    window_ns: float = 20.0
    n_pulses: int = 10_000
    seed: int = 0
    electronic_noise_rms_volts: float = 0.0
    volts_per_photoelectron: float = 1e-6
    readout: str = "window"

    def __post_init__(self):
        if self.lo_photons_per_pulse < 0:
            raise ValueError("LO photons per pulse must be >= 0")
        if self.lo_fluctuation < 0:
            raise ValueError("LO fluctuation must be >= 0")
        if not self.repetition_hz > 0 or not self.sample_rate_hz > 0:
            raise ValueError("repetition and sample rates must be > 0 Hz")
        if self.n_pulses < 2:
            raise ValueError(f"need at least 2 pulses, got {self.n_pulses}")
        if self.window_samples < 2:
            raise ValueError(f"window holds {self.window_samples} samples; need at least 2")
        if self.window_ns * 1e-9 > 1.0 / self.repetition_hz * (1 + 1e-12):
            raise ValueError(f"window {self.window_ns} ns exceeds the pulse period "
                             f"{1e9 / self.repetition_hz:.6g} ns")
        if self.electronic_noise_rms_volts < 0:
            raise ValueError("electronic noise RMS must be >= 0")
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}, got {self.readout!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        bias = truncation_bias(self.lo_fluctuation)
        if bias > MAX_TRUNCATION_BIAS:
            raise ValueError(f"LO fluctuation {self.lo_fluctuation} too large: truncating at "
                             f"zero intensity biases the mean by {bias:.2e} (limit {MAX_TRUNCATION_BIAS:g})")

    @property
    def sample_period_s(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def period_s(self) -> float:
        return 1.0 / self.repetition_hz

    @property
    def window_samples(self) -> int:
        return int(round(self.window_ns * 1e-9 * self.sample_rate_hz))

    @property
    def tau_s(self) -> float:
        return self.bhd.tau_s

    @property
    def splitter(self) -> SplitterGains:
        if self.bhd.splitter is not None:
            return self.bhd.splitter
        return splitter_for_delta(self.bhd.imbalance() or 0.0)

    @property
    def n_samples(self) -> int:
        return int(math.ceil(self.n_pulses * self.period_s * self.sample_rate_hz))

    def pulse_centers_s(self) -> np.ndarray:
        return (np.arange(self.n_pulses) + 0.5) * self.period_s

    def pulse_starts(self) -> np.ndarray:
        m = self.window_samples
        return np.rint(self.pulse_centers_s() * self.sample_rate_hz - m / 2).astype(np.int64)


def truncation_bias(f: float) -> float:
    """Relative shift of the mean LO intensity caused by truncating ``1 + f g`` at 0."""
    if f == 0:
        return 0.0
    a = 1.0 / f
    return f * norm.pdf(a) / norm.cdf(a)


@dataclass
class PulseTrace:
    """Sampled BHD output with the readout window of every pulse."""

    sample_period_s: float
    samples: np.ndarray
    pulse_starts: np.ndarray
    window_samples: int
    optical: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.pulse_starts = np.asarray(self.pulse_starts, dtype=np.int64)
        starts = self.pulse_starts
        if starts.size and np.any(np.diff(starts) <= 0):
            raise ValueError("pulse starts must be strictly increasing")
        if starts.size and (starts[0] < 0 or starts[-1] + self.window_samples > self.samples.size):
            raise ValueError("a pulse window lies outside the trace")

    @property
    def times_s(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.sample_period_s


@dataclass
class QuadratureSeries:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    @property
    def n(self) -> int:
        return int(self.values.size)


def task_rng(seed: int, task_index: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, task_index)``, order-independent across tasks."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(task_index,)))


def _lo_intensities(rng, i_lo, f, n):
    if f == 0:
        return np.full(n, float(i_lo))
    g = rng.standard_normal(n)
    cut = -1.0 / f
    bad = g <= cut
    while np.any(bad):
        g[bad] = rng.standard_normal(int(bad.sum()))
        bad = g <= cut
    return i_lo * (1.0 + f * g)


def difference_counts(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-pulse weighted photoelectron difference ``G1 n1 - G2 n2``."""
    sp = cfg.splitter
    intensity = _lo_intensities(rng, cfg.lo_photons_per_pulse, cfg.lo_fluctuation, cfg.n_pulses)
    n1 = rng.poisson(intensity * sp.t2)
    n2 = rng.poisson(intensity * sp.r2)
    return sp.g1 * n1 - sp.g2 * n2


def _render(amplitudes, centers_s, n_samples, dt, tau):
    # Pulses sharing a sub-sample phase (rounded to 1e-9 samples) share one kernel.
    half = int(math.ceil(KERNEL_HALF_WIDTH_TAU * tau / dt))
    offsets = np.arange(-half, half + 1)
    pos = np.asarray(centers_s) / dt
    idx = np.rint(pos).astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() > n_samples):
        raise ValueError("pulse centre outside the trace")
    phase = np.round(pos - idx, 9)
    # sample s lives at out[s + half]
    out = np.zeros(n_samples + 2 * half + 1)
    kernels = {}
    for amp, i, p in zip(np.asarray(amplitudes).tolist(), idx.tolist(), phase.tolist()):
        kernel = kernels.get(p)
        if kernel is None:
            kernel = kernels[p] = np.exp(-0.5 * ((offsets - p) * (dt / tau)) ** 2)
        out[i:i + 2 * half + 1] += amp * kernel
    return out[half:half + n_samples]


def simulate_trace(cfg: SimConfig, task_index: int = 0,
                   keep_components: bool = False) -> PulseTrace:
    """Render a deterministic pulse train for ``cfg``.

    With ``keep_components`` the noiseless optical part is kept on the trace
    so shot-only statistics can be compared with the total.
    """
    rng = task_rng(cfg.seed, task_index)
    dt = cfg.sample_period_s
    d = difference_counts(cfg, rng)
    optical = _render(d * cfg.volts_per_photoelectron, cfg.pulse_centers_s(),
                      cfg.n_samples, dt, cfg.tau_s)
    if cfg.electronic_noise_rms_volts > 0:
        samples = optical + rng.normal(0.0, cfg.electronic_noise_rms_volts, optical.size)
    else:
        samples = optical.copy()
    return PulseTrace(dt, samples, cfg.pulse_starts(), cfg.window_samples,
                      optical if keep_components else None)


def integrate_quadratures(trace: PulseTrace, window_samples: int | None = None,
                          readout: str = "window", component: str = "total") -> QuadratureSeries:
    """Read one quadrature per pulse.

    ``window`` sums the samples of each window times the sample period;
    ``peak`` takes the sample at the window centre. ``component="optical"``
    reads the noiseless part kept by ``simulate_trace(keep_components=True)``.
    """
    m = trace.window_samples if window_samples is None else window_samples
    if m < 1:
        raise ValueError("window must hold at least one sample")
    data = trace.samples if component == "total" else trace.optical
    if data is None:
        raise ValueError("trace has no separate optical component")
    starts = trace.pulse_starts
    if starts.size and (starts[0] < 0 or starts[-1] + m > data.size):
        raise ValueError(f"window of {m} samples runs past the end of the trace")
    if readout == "peak":
        return QuadratureSeries(data[starts + m // 2])
    if readout != "window":
        raise ValueError(f"unknown readout {readout!r}")
    idx = starts[:, None] + np.arange(m)
    return QuadratureSeries(data[idx].sum(axis=1) * trace.sample_period_s)


def correlation_coefficient(series: QuadratureSeries | np.ndarray) -> float | None:
    """Lag-1 correlation between consecutive quadratures; ``None`` if undefined."""
    x = series.values if isinstance(series, QuadratureSeries) else np.asarray(series, float)
    if x.size < 3:
        raise ValueError(f"need at least 3 quadratures, got {x.size}")
    a, b = x[:-1], x[1:]
    sa = math.sqrt(max(np.mean(a * a) - np.mean(a) ** 2, 0.0))
    sb = math.sqrt(max(np.mean(b * b) - np.mean(b) ** 2, 0.0))
    # guard against rounding residue of a constant series
    scale = max(np.max(np.abs(x)), 1e-300)
    if sa <= 1e-12 * scale or sb <= 1e-12 * scale:
        return None
    cc = (np.mean(a * b) - np.mean(a) * np.mean(b)) / (sa * sb)
    return float(min(1.0, max(-1.0, cc)))


def simulate_quadratures(cfg: SimConfig, task_index: int = 0) -> QuadratureSeries:
    return integrate_quadratures(simulate_trace(cfg, task_index), readout=cfg.readout)


def noise_vs_lo_scan(cfg: SimConfig, lo_levels, workers: int | None = None
                     ) -> list[tuple[float, float]]:
    """Quadrature variance at each LO level, ``[(I_LO, variance), ...]``.

    Level ``k`` uses RNG task index ``k`` so threaded and serial runs agree.
    """
    levels = [float(x) for x in lo_levels]
    if len(set(levels)) < 3:
        raise ValueError("need at least 3 distinct LO levels")

    def run(k):
        level_cfg = dataclasses.replace(cfg, lo_photons_per_pulse=levels[k])
        return float(np.var(simulate_quadratures(level_cfg, k).values, ddof=1))

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            variances = list(pool.map(run, range(len(levels))))
    else:
        variances = [run(k) for k in range(len(levels))]
    return list(zip(levels, variances))


# Analytic predictions for the simulated readout

def readout_gains(cfg: SimConfig) -> np.ndarray:
    """Quadrature produced by one photoelectron difference in pulse ``k0 + j``.

    Returned for ``j = -J..J`` around an interior pulse ``k0``; index ``J`` is
    the pulse's own window.
    """
    dt, tau, period = cfg.sample_period_s, cfg.tau_s, cfg.period_s
    m = cfg.window_samples
    k0 = cfg.n_pulses // 2
    start = int(np.rint(((k0 + 0.5) * period) / dt - m / 2))
    idx = np.array([start + m // 2]) if cfg.readout == "peak" else start + np.arange(m)
    span = int(math.ceil((KERNEL_HALF_WIDTH_TAU * tau + m * dt) / period)) + 1
    gains = []
    for j in range(-span, span + 1):
        center = (k0 + j + 0.5) * period
        nearest = int(np.rint(center / dt))
        half = int(math.ceil(KERNEL_HALF_WIDTH_TAU * tau / dt))
        inside = idx[np.abs(idx - nearest) <= half]
        w = np.exp(-0.5 * ((inside * dt - center) / tau) ** 2).sum()
        gains.append(w * (dt if cfg.readout == "window" else 1.0))
    return np.array(gains) * cfg.volts_per_photoelectron


def electronic_variance(cfg: SimConfig) -> float:
    """Quadrature variance contributed by white per-sample electronic noise."""
    s2 = cfg.electronic_noise_rms_volts ** 2
    if cfg.readout == "peak":
        return s2
    return cfg.window_samples * s2 * cfg.sample_period_s ** 2


def predicted_coefficients(cfg: SimConfig) -> tuple[float, float, float]:
    """``(a, b, c)`` of the expected variance ``a I^2 + b I + c`` versus LO photons.

    Shot noise gives ``G1^2 t^2 + G2^2 r^2`` per photon, LO fluctuation gives
    ``f^2 (G1 t^2 - G2 r^2)^2`` per photon squared; both are scaled by the sum
    of squared readout gains over the pulse and its neighbours.
    """
    sp = cfg.splitter
    w2 = float(np.sum(readout_gains(cfg) ** 2))
    b = w2 * (sp.g1 ** 2 * sp.t2 + sp.g2 ** 2 * sp.r2)
    a = w2 * cfg.lo_fluctuation ** 2 * (sp.g1 * sp.t2 - sp.g2 * sp.r2) ** 2
    return a, b, electronic_variance(cfg)


def predicted_variance(cfg: SimConfig, lo_photons: float | None = None) -> float:
    i = cfg.lo_photons_per_pulse if lo_photons is None else lo_photons
    a, b, c = predicted_coefficients(cfg)
    return a * i * i + b * i + c


def predicted_cc(cfg: SimConfig, lo_photons: float | None = None) -> float:
    """Expected lag-1 correlation from pulse-tail overlap, diluted by electronics."""
    i = cfg.lo_photons_per_pulse if lo_photons is None else lo_photons
    w = readout_gains(cfg)
    sp = cfg.splitter
    per_pulse = (i * (sp.g1 ** 2 * sp.t2 + sp.g2 ** 2 * sp.r2)
                 + i * i * cfg.lo_fluctuation ** 2 * (sp.g1 * sp.t2 - sp.g2 * sp.r2) ** 2)
    cov = per_pulse * float(np.sum(w[1:] * w[:-1]))
    var = per_pulse * float(np.sum(w * w)) + electronic_variance(cfg)
    return cov / var if var > 0 else 0.0


def electronic_rms_for_coeff(cfg: SimConfig, c_ele: float) -> float:
    """Per-sample RMS volts that yields ``N_ele = c_ele / I_LO`` in shot-noise units."""
    _, b, _ = predicted_coefficients(cfg)
    target = c_ele * b
    if cfg.readout == "peak":
        return math.sqrt(target)
    return math.sqrt(target / (cfg.window_samples * cfg.sample_period_s ** 2))
