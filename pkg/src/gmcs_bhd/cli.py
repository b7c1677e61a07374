"""Command-line front end.

Exit codes: 0 success / positive key, 2 valid run without a key (or an
undefined statistic), 1 error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys

import numpy as np

from . import __version__
from .analysis import (
    decompose_noise,
    fit_quadratic,
    optimize_lo,
    shot_to_electronic_ratio_db,
    sweep_cmrr,
    sweep_distance,
    sweep_lo,
    sweep_repetition,
)
from .config import ConfigError, RunConfig, bundled_configs, load_config
from .fileio import (
    provenance,
    read_trace,
    read_xy,
    sweep_summary,
    write_quadratures,
    write_sweep,
    write_table,
    write_trace,
)
from .keyrate import secret_key_rate
from .model import overlap_noise_from_cc, shot_to_electronic_db
from .montecarlo import (
    correlation_coefficient,
    integrate_quadratures,
    noise_vs_lo_scan,
    predicted_cc,
    predicted_coefficients,
    simulate_trace,
)

log = logging.getLogger("gmcs_bhd")

EXIT_OK, EXIT_ERROR, EXIT_NO_KEY = 0, 1, 2

REFERENCE_OVERLAP = (0.044, 0.051, 16.9)  # bound, CC, V_A of the characterised detector

AXIS_SCALE = {"repetition": 1e6, "cmrr": 1.0, "lo": 1.0, "distance": 1.0}
AXIS_UNIT = {"repetition": "MHz", "cmrr": "dB", "lo": "photons/pulse", "distance": "km"}

NOISE_LABELS = {
    "eps_a": "eps_A",
    "eps_overlap": "eps_overlap",
    "n_lo": "N_LO",
    "n_leak": "N_leak",
    "n_ele": "N_ele",
}


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value)
    if getattr(args, "seed", None) is not None:
        cfg.set("sim.seed", str(args.seed))
    cfg.fmt = getattr(args, "format", "csv")
    cfg.output = getattr(args, "out", None)
    cfg.verbosity = args.verbose - int(args.quiet)
    return cfg


def _display(value: float, raw: bool) -> float:
    return value if raw else max(value, 0.0)


def _show_rate(label, value, unit, raw):
    shown = _display(value, raw)
    note = "" if raw or value > 0 else f"   (raw {value:.6g}; no secure key)"
    print(f"{label:<22s}{shown:.6g} {unit}{note}")


# -- keyrate ----------------------------------------------------------

def cmd_keyrate(args) -> int:
    cfg = _load(args)
    params = cfg.system_params()
    result = secret_key_rate(params)
    eta_g = params.eta_g
    print(f"# {cfg.source}")
    print(f"{'noise component':<16s}{'input-referred':>18s}{'output-referred':>18s}")
    rows = result.budget.table(eta_g)
    for name, inp, out in rows:
        print(f"{NOISE_LABELS[name]:<16s}{inp:>18.6g}{out:>18.6g}")
    print()
    print(f"{'eta*G':<22s}{eta_g:.6g}")
    print(f"{'chi':<22s}{result.chi:.6g} SNU")
    print(f"{'eps_E':<22s}{result.eps_e:.6g} SNU")
    print(f"{'eps':<22s}{result.eps:.6g} SNU")
    print(f"{'I_AB':<22s}{result.i_ab:.6g} bit/pulse")
    print(f"{'I_BE':<22s}{result.i_be:.6g} bit/pulse")
    _show_rate("delta_I", result.delta_i, "bit/pulse", args.raw)
    if result.delta_i_per_second is not None:
        _show_rate("delta_I per second", result.delta_i_per_second, "bit/s", args.raw)
    if cfg.output:
        meta = provenance("keyrate", cfg.header_lines())
        cols = ["component", "input_referred", "output_referred"]
        table = [[NOISE_LABELS[n], i, o] for n, i, o in rows]
        table += [["chi", result.chi, ""], ["eps_E", result.eps_e, ""], ["eps", result.eps, ""],
                  ["I_AB", result.i_ab, ""], ["I_BE", result.i_be, ""],
                  ["delta_I", result.delta_i, ""],
                  ["delta_I_per_second", result.delta_i_per_second, ""]]
        write_table(cfg.output, cols, table, meta, cfg.fmt)
        log.info("wrote %s", cfg.output)
    return EXIT_OK if result.has_key else EXIT_NO_KEY


# -- sweep ------------------------------------------------------------

def _axis_values(args, axis, cfg):
    scale = AXIS_SCALE[axis]
    defaults = {
        "repetition": (1.0, 60.0, False),
        "cmrr": (30.0, 80.0, False),
        "lo": (cfg.get("sweep", "lo_min_photons", 1e6), cfg.get("sweep", "lo_max_photons", 1e10), True),
        "distance": (0.0, 40.0, False),
    }
    start, stop, log_spaced = defaults[axis]
    start = args.start if args.start is not None else start
    stop = args.stop if args.stop is not None else stop
    log_spaced = args.log or log_spaced
    if args.points < 1:
        raise ValueError("empty sweep range: --points must be >= 1")
    if stop < start:
        raise ValueError(f"empty sweep range: stop {stop} < start {start}")
    if log_spaced:
        if start <= 0:
            raise ValueError("log-spaced sweep needs a positive start")
        xs = np.logspace(math.log10(start), math.log10(stop), args.points)
    else:
        xs = np.linspace(start, stop, args.points)
    return xs * scale


def cmd_sweep(args) -> int:
    cfg = _load(args)
    params = cfg.system_params()
    axis = args.axis
    xs = _axis_values(args, axis, cfg)
    if axis == "repetition":
        res = sweep_repetition(params, xs)
    elif axis == "cmrr":
        res = sweep_cmrr(params, xs)
    elif axis == "lo":
        res = sweep_lo(params, xs)
    else:
        loss = args.loss_db_per_km or cfg.get("sweep", "loss_db_per_km") \
            or cfg.get("channel", "loss_db_per_km")
        if not loss:
            raise ConfigError("distance sweep needs a fiber loss (--loss-db-per-km or "
                              "sweep.loss_db_per_km)")
        lo_range = (cfg.get("sweep", "lo_min_photons", 1e6), cfg.get("sweep", "lo_max_photons", 1e10))
        res = sweep_distance(params, xs, loss, lo_range=lo_range)
    out = cfg.output or f"sweep_{axis}.{cfg.fmt}"
    meta = provenance(f"sweep {axis}", cfg.header_lines())
    write_sweep(out, res, meta, cfg.fmt)
    scale, unit = AXIS_SCALE[axis], AXIS_UNIT[axis]
    rate_unit = "bit/s" if res.objective == "per_second" else "bit/pulse"
    print(f"wrote {out} ({len(res.xs)} points)")
    print(f"argmax: {res.argmax / scale:.6g} {unit}  "
          f"(max {_display(res.max_value, args.raw):.6g} {rate_unit})")
    for root, (lo, hi) in res.zero_crossings:
        print(f"zero crossing: {root / scale:.6g} {unit}  "
              f"(bracket {lo / scale:.6g} .. {hi / scale:.6g})")
    for name, value in res.thresholds.items():
        print(f"{name}: {value / scale:.6g} {unit}")
    if not res.zero_crossings and res.max_value <= 0:
        print("no secure key anywhere on the sweep")
    if args.plot:
        from .plotting import plot_sweep
        plot_sweep(res, args.plot, raw=args.raw)
        print(f"wrote {args.plot}")
    if cfg.verbosity > 1:
        log.debug("\n".join(sweep_summary(res)))
    return EXIT_OK


# -- optimize-lo ------------------------------------------------------

def cmd_optimize_lo(args) -> int:
    cfg = _load(args)
    params = cfg.system_params()
    lo_range = (args.min if args.min is not None else cfg.get("sweep", "lo_min_photons", 1e6),
                args.max if args.max is not None else cfg.get("sweep", "lo_max_photons", 1e10))
    best = optimize_lo(params, lo_range)
    r = best.result
    print(f"{'optimal LO':<22s}{best.i_lo:.6g} photons/pulse"
          + ("   (range boundary: objective is monotone)" if best.monotone else ""))
    print(f"{'N_ele (output)':<22s}{r.budget.n_ele:.6g} SNU")
    print(f"{'N_LO (output)':<22s}{r.budget.n_lo:.6g} SNU")
    _show_rate("delta_I", r.delta_i, "bit/pulse", args.raw)
    if r.delta_i_per_second is not None:
        _show_rate("delta_I per second", r.delta_i_per_second, "bit/s", args.raw)
    return EXIT_OK if r.has_key else EXIT_NO_KEY


# -- montecarlo -------------------------------------------------------

def cmd_montecarlo(args) -> int:
    cfg = _load(args)
    levels = cfg.get("sim", "lo_levels_photons")
    if not levels:
        raise ConfigError(f"{cfg.source}: sim.lo_levels_photons is required")
    sim = cfg.sim_config(lo_photons=max(levels))
    workers = args.workers or cfg.get("sim", "workers")
    points = noise_vs_lo_scan(sim, levels, workers=workers)
    fit = fit_quadratic(points)
    a_true, b_true, c_true = predicted_coefficients(sim)
    c_ele_fit, c_lo_fit = decompose_noise(fit)
    c_ele_true, c_lo_true = c_true / b_true, a_true / b_true
    ratio_lo = args.ratio_lo or max(levels)
    ratio_fit = shot_to_electronic_ratio_db(fit, ratio_lo)
    ratio_true = shot_to_electronic_db(c_ele_true / ratio_lo) if c_ele_true > 0 else math.inf

    print(f"# {cfg.source}, seed {sim.seed}, {sim.n_pulses} pulses per level, "
          f"{len(levels)} LO levels")
    print(f"fit  y = a I^2 + b I + c   (R^2 = {fit.r_squared:.6f})")
    for name, val, se, truth in zip("abc", fit.coefficients, fit.stderr, (a_true, b_true, c_true)):
        print(f"  {name} = {val:.6g} +/- {se:.2g}   analytic {truth:.6g}")
    print(f"c_ele (N_ele = c_ele / I_LO): fit {c_ele_fit:.6g}   configured {c_ele_true:.6g}")
    print(f"c_lo  (N_LO = c_lo * I_LO):   fit {c_lo_fit:.6g} +/- {fit.stderr[0] / fit.b:.2g}"
          f"   analytic {c_lo_true:.6g}")
    print(f"N_LO at {ratio_lo:.3g} photons: fit {c_lo_fit * ratio_lo:.6g}   "
          f"analytic {c_lo_true * ratio_lo:.6g}")
    print(f"shot/electronic ratio at {ratio_lo:.3g} photons: fit {ratio_fit:.3f} dB   "
          f"configured {ratio_true:.3f} dB")

    out = cfg.output or f"montecarlo.{cfg.fmt}"
    meta = provenance("montecarlo", cfg.header_lines()) + [
        f"fit_a = {fit.a!r}", f"fit_b = {fit.b!r}", f"fit_c = {fit.c!r}",
        f"fit_r_squared = {fit.r_squared!r}", f"c_ele_fit = {c_ele_fit!r}",
        f"c_lo_fit = {c_lo_fit!r}", f"c_ele_configured = {c_ele_true!r}",
        f"c_lo_analytic = {c_lo_true!r}"]
    rows = [[x, y, a_true * x * x + b_true * x + c_true] for x, y in points]
    write_table(out, ["lo_photons", "variance", "predicted_variance"], rows, meta, cfg.fmt)
    print(f"wrote {out}")
    if args.trace_out:
        trace_cfg = dataclasses.replace(sim, lo_photons_per_pulse=max(levels))
        trace = simulate_trace(trace_cfg, task_index=levels.index(max(levels)))
        write_trace(args.trace_out, trace, sim.repetition_hz, sim.period_s / 2,
                    provenance("montecarlo trace", cfg.header_lines()), n_pulses=args.trace_pulses)
        print(f"wrote {args.trace_out}")
    if args.plot:
        from .plotting import plot_noise_scan
        plot_noise_scan(points, fit, args.plot, (a_true, b_true, c_true))
        print(f"wrote {args.plot}")
    return EXIT_OK


# -- cc ---------------------------------------------------------------

def _print_bounds(cc, va):
    for n in (1, 2):
        print(f"overlap bound ({n} neighbour{'s' if n == 2 else ''}): "
              f"{overlap_noise_from_cc(va, cc, n):.4g} SNU  (V_A = {va:g})")
    bound, ref_cc, ref_va = REFERENCE_OVERLAP
    print(f"reference: {bound} SNU quoted for the characterised detector "
          f"(CC = {ref_cc}, V_A = {ref_va})")


def cmd_cc(args) -> int:
    va = args.va
    cfg = _load(args) if args.config else None
    if va is None and cfg is not None:
        va = cfg.get("modulation", "va_snu")

    if args.cc is not None:
        print(f"CC = {args.cc:.6g}")
        if va is None:
            raise ValueError("give --va (or a config with modulation.va_snu) to bound the overlap noise")
        _print_bounds(args.cc, va)
        return EXIT_OK

    shot_only = None
    if args.trace:
        rep = args.repetition_mhz * 1e6 if args.repetition_mhz else None
        window = args.window_ns * 1e-9 if args.window_ns else None
        first = args.first_center_ns * 1e-9 if args.first_center_ns is not None else None
        trace = read_trace(args.trace, rep, window, first)
        series = integrate_quadratures(trace, readout=args.readout or "window")
        source = args.trace
    elif cfg is not None:
        sim = cfg.sim_config()
        if args.readout:
            sim = dataclasses.replace(sim, readout=args.readout)
        trace = simulate_trace(sim, keep_components=True)
        series = integrate_quadratures(trace, readout=sim.readout)
        shot_only = correlation_coefficient(integrate_quadratures(trace, readout=sim.readout,
                                                                  component="optical"))
        source = f"simulated from {cfg.source} (expected CC {predicted_cc(sim):.4g})"
    else:
        raise ValueError("cc needs a config, --trace FILE or --cc VALUE")

    if args.quadratures_out:
        params = [f"source = {source}"] + (cfg.header_lines() if cfg is not None else [])
        write_quadratures(args.quadratures_out, series, provenance("cc", params))
    if args.plot:
        from .plotting import plot_quadratures
        plot_quadratures(series, args.plot)

    cc = correlation_coefficient(series)
    print(f"# {source}: {series.n} quadratures")
    if cc is None:
        print("undefined CC: quadrature series has zero variance")
        return EXIT_NO_KEY
    print(f"CC = {cc:.6g}")
    if shot_only is not None:
        print(f"CC (optical part only) = {shot_only:.6g}")
    if va is not None:
        _print_bounds(cc, va)
    return EXIT_OK


# -- fit --------------------------------------------------------------

def cmd_fit(args) -> int:
    x, y = read_xy(args.file)
    fit = fit_quadratic(x=x, y=y)
    print(f"y = a x^2 + b x + c   ({fit.n} points, R^2 = {fit.r_squared:.6f})")
    for name, val, se in zip("abc", fit.coefficients, fit.stderr):
        print(f"  {name} = {val:.6g} +/- {se:.2g}")
    rows = [["a", fit.a, fit.stderr[0]], ["b", fit.b, fit.stderr[1]],
            ["c", fit.c, fit.stderr[2]], ["r_squared", fit.r_squared, ""]]
    if fit.b > 0:
        c_ele, c_lo = decompose_noise(fit)
        print(f"c_ele = c/b = {c_ele:.6g}   c_lo = a/b = {c_lo:.6g}")
        rows += [["c_ele", c_ele, ""], ["c_lo", c_lo, ""]]
        if args.lo_photons:
            ratio = shot_to_electronic_ratio_db(fit, args.lo_photons)
            print(f"shot/electronic ratio at {args.lo_photons:.3g}: {ratio:.3f} dB")
            rows.append(["shot_to_electronic_db", ratio, ""])
    if args.out:
        meta = provenance("fit", [f"input = {args.file}"])
        write_table(args.out, ["parameter", "value", "stderr"], rows, meta, args.format)
        print(f"wrote {args.out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmcs-bhd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def config_args(sp, required=True):
        if required:
            sp.add_argument("config", help="config file, or a bundled name such as fig2.cfg")
        else:
            sp.add_argument("config", nargs="?", help="config file or bundled name")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
        sp.add_argument("--format", choices=("csv", "tsv"), default="csv")
        sp.add_argument("--raw", action="store_true", help="show negative key rates unclamped")

    k = sub.add_parser("keyrate", help="noise budget and secret key rate for one operating point")
    config_args(k)
    k.add_argument("--out", help="also write the budget and rates to this file")
    k.set_defaults(func=cmd_keyrate)

    s = sub.add_parser("sweep", help="key rate along one axis")
    s.add_argument("axis", choices=("repetition", "cmrr", "lo", "distance"))
    config_args(s)
    s.add_argument("--start", type=float, help="axis start (MHz, dB, photons or km)")
    s.add_argument("--stop", type=float, help="axis stop (same units as --start)")
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--log", action="store_true", help="log-spaced grid")
    s.add_argument("--loss-db-per-km", type=float)
    s.add_argument("--out", help="data file (default sweep_<axis>.csv)")
    s.add_argument("--plot", help="also render the curve to this .svg/.pdf file")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("optimize-lo", help="LO level maximising the key rate per pulse")
    config_args(o)
    o.add_argument("--min", type=float, help="lowest LO photons per pulse")
    o.add_argument("--max", type=float, help="highest LO photons per pulse")
    o.set_defaults(func=cmd_optimize_lo)

    m = sub.add_parser("montecarlo", help="simulated noise-vs-LO scan and decomposition")
    config_args(m)
    m.add_argument("--seed", type=int, help="override sim.seed")
    m.add_argument("--workers", type=int, help="threads for the LO levels")
    m.add_argument("--ratio-lo", type=float, help="LO level for the shot/electronic ratio")
    m.add_argument("--out", help="data file (default montecarlo.csv)")
    m.add_argument("--plot", help="render variance vs LO to this .svg/.pdf file")
    m.add_argument("--trace-out", help="write the raw trace at the highest LO level")
    m.add_argument("--trace-pulses", type=int, default=200, help="pulses kept in --trace-out")
    m.set_defaults(func=cmd_montecarlo)

    c = sub.add_parser("cc", help="lag-1 correlation of pulse quadratures and overlap bound")
    config_args(c, required=False)
    c.add_argument("--trace", help="two-column trace file (time_seconds, volts)")
    c.add_argument("--cc", type=float, help="use this correlation coefficient directly")
    c.add_argument("--va", type=float, help="modulation variance V_A for the overlap bound")
    c.add_argument("--seed", type=int, help="override sim.seed")
    c.add_argument("--repetition-mhz", type=float)
    c.add_argument("--window-ns", type=float)
    c.add_argument("--first-center-ns", type=float)
    c.add_argument("--readout", choices=("window", "peak"))
    c.add_argument("--quadratures-out", help="write the quadrature series, one per line")
    c.add_argument("--plot", help="render X(n+1) vs X(n) to this file")
    c.set_defaults(func=cmd_cc)

    f = sub.add_parser("fit", help="quadratic fit of a two-column file")
    f.add_argument("file")
    f.add_argument("--lo-photons", type=float, help="LO level for the shot/electronic ratio")
    f.add_argument("--out")
    f.add_argument("--format", choices=("csv", "tsv"), default="csv")
    f.set_defaults(func=cmd_fit)

    sub.add_parser("configs", help="list bundled configs").set_defaults(
        func=lambda a: print("\n".join(bundled_configs())) or EXIT_OK)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    log.setLevel(level)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
