"""Strict INI-style run configuration.

Every key carries its unit in its name. Unknown sections or keys are errors so
a misspelt ``bandwidth_hz`` cannot silently fall back to a default.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .model import (
    BhdParams,
    ChannelParams,
    LoParams,
    ModulationParams,
    ReceiverParams,
    SplitterGains,
    SystemParams,
)
from .montecarlo import SimConfig, electronic_rms_for_coeff

CONFIG_DIR_ENV = "GMCS_BHD_CONFIG_DIR"

FLOAT, INT, STR, FLOATS = "float", "int", "str", "floats"

SCHEMA: dict[str, dict[str, str]] = {
    "modulation": {"va_snu": FLOAT, "repetition_mhz": FLOAT},
    "channel": {"transmittance": FLOAT, "distance_km": FLOAT, "loss_db_per_km": FLOAT},
    "receiver": {"eta": FLOAT, "beta": FLOAT},
    "noise": {
        "eps_a_snu": FLOAT,
        "n_leak_snu": FLOAT,
        "eps_overlap_snu": FLOAT,
        "n_ele_snu": FLOAT,
        "n_lo_snu": FLOAT,
        "nlo_path": STR,
    },
    "bhd": {
        "bandwidth_mhz": FLOAT,
        "delta": FLOAT,
        "cmrr_db": FLOAT,
        "splitter_t2": FLOAT,
        "splitter_r2": FLOAT,
        "gain1": FLOAT,
        "gain2": FLOAT,
        "electronic_noise_coeff_photons": FLOAT,
        "nlo_coeff_per_photon": FLOAT,
        "pulse_width_ns": FLOAT,
    },
    "lo": {"lo_photons_per_pulse": FLOAT, "fluctuation_fraction": FLOAT},
    "sim": {
        "repetition_mhz": FLOAT,
        "sample_rate_gsps": FLOAT,
        "window_ns": FLOAT,
        "n_pulses": INT,
        "seed": INT,
        "electronic_noise_rms_volts": FLOAT,
        "volts_per_photoelectron": FLOAT,
        "readout": STR,
        "lo_levels_photons": FLOATS,
        "workers": INT,
    },
    "sweep": {
        "loss_db_per_km": FLOAT,
        "lo_min_photons": FLOAT,
        "lo_max_photons": FLOAT,
    },
}


class ConfigError(ValueError):
    pass


def _parse_value(kind: str, text: str, where: str):
    text = text.strip()
    try:
        if kind == FLOAT:
            value = float(text)
            if math.isnan(value):
                raise ValueError("nan")
            return value
        if kind == INT:
            return int(text, 0)
        if kind == FLOATS:
            return [float(t) for t in re.split(r"[,\s]+", text) if t]
        return text
    except ValueError:
        raise ConfigError(f"{where}: cannot read {text!r} as {kind}") from None


def _format_value(kind: str, value) -> str:
    if kind == FLOATS:
        return ", ".join(repr(float(v)) for v in value)
    if kind == FLOAT:
        return repr(float(value))
    return str(value)


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return n
    return None


@dataclass
class RunConfig:
    """Parsed configuration: ``values[section][key]`` with typed values.

    ``output``, ``fmt`` and ``verbosity`` are run options filled in by the
    command line, not read from the file.
    """

    values: dict[str, dict[str, object]] = field(default_factory=dict)
    source: str = "<string>"
    output: str | None = None
    fmt: str = "csv"
    verbosity: int = 0

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def has(self, section: str, key: str | None = None) -> bool:
        if key is None:
            return section in self.values
        return key in self.values.get(section, {})

    def set(self, dotted: str, text: str) -> None:
        """Apply a ``section.key=value`` override with the same strictness as parsing."""
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        section, key = dotted.split(".", 1)
        kind = _kind(section, key, self.source, None)
        self.values.setdefault(section, {})[key] = _parse_value(kind, text, f"{section}.{key}")

    def unset(self, section: str, key: str) -> None:
        self.values.get(section, {}).pop(key, None)

    def to_text(self) -> str:
        out = io.StringIO()
        for section, keys in self.values.items():
            out.write(f"[{section}]\n")
            for key, value in keys.items():
                out.write(f"{key} = {_format_value(SCHEMA[section][key], value)}\n")
            out.write("\n")
        return out.getvalue()

    def header_lines(self) -> list[str]:
        lines = []
        for section, keys in self.values.items():
            for key, value in keys.items():
                lines.append(f"{section}.{key} = {_format_value(SCHEMA[section][key], value)}")
        return lines

    # -- builders -------------------------------------------------------

    def system_params(self) -> SystemParams:
        where = self.source
        try:
            va = self._require("modulation", "va_snu")
            rep = self.get("modulation", "repetition_mhz")
            channel = self._channel()
            rx = ReceiverParams(self._require("receiver", "eta"), self.get("receiver", "beta", 1.0))
            return SystemParams(
                modulation=ModulationParams(va),
                channel=channel,
                receiver=rx,
                bhd=self._bhd(),
                lo=self._lo(),
                repetition_hz=rep * 1e6 if rep is not None else None,
                eps_a=self.get("noise", "eps_a_snu", 0.0),
                n_leak=self.get("noise", "n_leak_snu", 0.0),
                eps_overlap_fixed=self.get("noise", "eps_overlap_snu"),
                n_ele_fixed=self.get("noise", "n_ele_snu"),
                n_lo_fixed=self.get("noise", "n_lo_snu"),
                nlo_path=self.get("noise", "nlo_path", "auto"),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None

    def sim_config(self, lo_photons: float | None = None) -> SimConfig:
        where = self.source
        bhd = self._bhd()
        if bhd is None:
            raise ConfigError(f"{where}: [bhd] section is required for simulation")
        rep = self.get("sim", "repetition_mhz", self.get("modulation", "repetition_mhz"))
        if lo_photons is None:
            lo_photons = self.get("lo", "lo_photons_per_pulse", 0.0)
        kwargs = dict(
            bhd=bhd,
            lo_photons_per_pulse=lo_photons,
            lo_fluctuation=self.get("lo", "fluctuation_fraction", 0.0),
            window_ns=self.get("sim", "window_ns", 20.0),
            n_pulses=self.get("sim", "n_pulses", 10_000),
            seed=self.get("sim", "seed", 0),
            volts_per_photoelectron=self.get("sim", "volts_per_photoelectron", 1e-6),
            readout=self.get("sim", "readout", "window"),
        )
        if rep is not None:
            kwargs["repetition_hz"] = rep * 1e6
        rate = self.get("sim", "sample_rate_gsps")
        if rate is not None:
            kwargs["sample_rate_hz"] = rate * 1e9
        try:
            cfg = SimConfig(**kwargs)
            rms = self.get("sim", "electronic_noise_rms_volts")
            if rms is None and bhd.electronic_noise_coeff > 0:
                rms = electronic_rms_for_coeff(cfg, bhd.electronic_noise_coeff)
            return dataclasses.replace(cfg, electronic_noise_rms_volts=rms or 0.0)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None

    def _require(self, section, key):
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"{self.source}: missing required key {section}.{key}")
        return value

    def _channel(self) -> ChannelParams:
        g = self.get("channel", "transmittance")
        dist = self.get("channel", "distance_km")
        loss = self.get("channel", "loss_db_per_km")
        if g is not None and dist is not None:
            raise ConfigError(f"{self.source}: give channel.transmittance or "
                              "channel.distance_km, not both")
        if g is not None:
            return ChannelParams(g)
        if dist is not None and loss is not None:
            return ChannelParams.from_distance(dist, loss)
        raise ConfigError(f"{self.source}: [channel] needs transmittance or "
                          "distance_km with loss_db_per_km")

    def _bhd(self) -> BhdParams | None:
        if not self.has("bhd"):
            return None
        b = self.values["bhd"]
        splitter = None
        if "splitter_t2" in b or "splitter_r2" in b:
            t2 = b.get("splitter_t2")
            r2 = b.get("splitter_r2", None if t2 is None else 1.0 - t2)
            if t2 is None:
                t2 = 1.0 - r2
            splitter = SplitterGains(t2, r2, b.get("gain1", 1.0), b.get("gain2", 1.0))
        elif "gain1" in b or "gain2" in b:
            splitter = SplitterGains(0.5, 0.5, b.get("gain1", 1.0), b.get("gain2", 1.0))
        width = b.get("pulse_width_ns")
        return BhdParams(
            bandwidth_hz=self._require("bhd", "bandwidth_mhz") * 1e6,
            electronic_noise_coeff=b.get("electronic_noise_coeff_photons", 0.0),
            nlo_empirical_coeff=b.get("nlo_coeff_per_photon"),
            delta=b.get("delta"),
            splitter=splitter,
            cmrr_db=b.get("cmrr_db"),
            pulse_width_s=width * 1e-9 if width is not None else None,
        )

    def _lo(self) -> LoParams | None:
        i_lo = self.get("lo", "lo_photons_per_pulse")
        if i_lo is None:
            return None
        return LoParams(i_lo, self.get("lo", "fluctuation_fraction"))


def _kind(section: str, key: str, source: str, text: str | None) -> str:
    if section not in SCHEMA:
        line = _line_of(text, section, None) if text else None
        at = f"{source}:{line}" if line else source
        raise ConfigError(f"{at}: unknown section [{section}]")
    if key not in SCHEMA[section]:
        line = _line_of(text, section, key) if text else None
        at = f"{source}:{line}" if line else source
        raise ConfigError(f"{at}: unknown key '{key}' in [{section}]")
    return SCHEMA[section][key]


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from None
    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        values[section] = {}
        for key, raw in parser.items(section):
            kind = _kind(section, key, source, text)
            line = _line_of(text, section, key)
            where = f"{source}:{line} {section}.{key}" if line else f"{source} {section}.{key}"
            values[section][key] = _parse_value(kind, raw, where)
    return RunConfig(values, source)


def bundled_configs() -> list[str]:
    root = resources.files("gmcs_bhd") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def resolve_config_path(name: str) -> tuple[str, str]:
    """Find a config by path, then in ``$GMCS_BHD_CONFIG_DIR``, then bundled.

    Returns ``(text, source label)``.
    """
    candidates = [Path(name)]
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    stem = name if name.endswith(".cfg") else f"{name}.cfg"
    if env_dir:
        candidates += [Path(env_dir) / name, Path(env_dir) / stem]
    for path in candidates:
        if path.is_file():
            return path.read_text(), str(path)
    bundled = resources.files("gmcs_bhd") / "configs" / Path(stem).name
    if bundled.is_file():
        return bundled.read_text(), f"<bundled>/{Path(stem).name}"
    raise ConfigError(f"config {name!r} not found (looked in cwd, ${CONFIG_DIR_ENV}, bundled configs)")


def load_config(name: str) -> RunConfig:
    text, source = resolve_config_path(name)
    return parse_config(text, source)
