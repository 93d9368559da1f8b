"""Simulation parameters and their structured-text form (an INI ``[sim]`` section)."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_circuits: int = 2000
    fraction_malicious: float = 0.1
    seed: int = 1
    # per-hop one-way latency, sampled once per hop per circuit
    latency_ms: tuple = (10.0, 60.0)
    jitter_ms: float = 1.0
    # time a built circuit stays clean before the client attaches a stream
    idle_ms: tuple = (100.0, 3000.0)
    connect_ms: tuple = (100.0, 500.0)  # exit-side DNS + TCP connect
    data_cells: tuple = (200, 2000)
    dropmark_count: int = 3
    dropmark_spacing_ms: float = 100.0
    detector_min_cells: int = 2
    detector_tolerance_ms: float = 50.0
    detector_mode: str = "timing"  # "timing": padding looks like data; "kinds": it does not
    defense: bool = False
    defense_variant: str = "conservative"  # or "unconservative"
    conservative_teardown: bool = False
    padding_cap: int = 350
    burst_spacing_ms: float = 0.0
    horizon_ms: float = 120_000.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_circuits < 0:
            raise ConfigError("n_circuits must be >= 0")
        if not 0.0 <= self.fraction_malicious <= 1.0:
            raise ConfigError(f"fraction_malicious must be in [0, 1], got {self.fraction_malicious}")
        for name in ("latency_ms", "idle_ms", "connect_ms", "data_cells"):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise ConfigError(f"{name} must be a range lo <= hi with lo >= 0")
        if self.jitter_ms < 0 or self.burst_spacing_ms < 0:
            raise ConfigError("jitter and spacing must be non-negative")
        if self.dropmark_count < 1 or self.dropmark_spacing_ms <= 0:
            raise ConfigError("dropmark pattern needs at least one cell and positive spacing")
        if self.detector_min_cells < 1 or self.detector_tolerance_ms < 0:
            raise ConfigError("detector thresholds out of range")
        if self.detector_mode not in ("timing", "kinds"):
            raise ConfigError(f"detector_mode must be 'timing' or 'kinds', got {self.detector_mode!r}")
        if self.defense_variant not in ("conservative", "unconservative"):
            raise ConfigError(f"unknown defense_variant {self.defense_variant!r}")
        if self.padding_cap < 0:
            raise ConfigError("padding_cap must be >= 0")

    def replace(self, **changes) -> "SimConfig":
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **{k: _coerce(self, k, v) for k, v in changes.items()})

    def to_text(self) -> str:
        lines = ["[sim]"]
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(_fmt(x) for x in v)
            elif isinstance(v, bool):
                v = "on" if v else "off"
            else:
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SimConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        if not cp.has_section("sim"):
            raise ConfigError("config needs a [sim] section")
        return cls().replace(**dict(cp.items("sim")))

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _fmt(x):
    if isinstance(x, float) and x.is_integer():
        return f"{x:.1f}"
    return str(x)


_BOOL = {"on": True, "true": True, "yes": True, "1": True,
         "off": False, "false": False, "no": False, "0": False}


def _coerce(cfg, key, value):
    current = getattr(cfg, key)
    if not isinstance(value, str):
        return tuple(value) if isinstance(current, tuple) else value
    try:
        if isinstance(current, bool):
            return _BOOL[value.strip().lower()]
        if isinstance(current, tuple):
            parts = [p.strip() for p in value.split(",")]
            typ = type(current[0])
            if len(parts) != 2:
                raise ValueError
            return tuple(typ(float(p)) if typ is int else typ(p) for p in parts)
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
        return value.strip()
    except (KeyError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None
