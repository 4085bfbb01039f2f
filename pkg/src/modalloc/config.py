"""Flat ``key = value`` run configuration.

Values are Python literals (numbers, bracketed lists, dicts, quoted
strings); anything that does not parse as a literal is kept as a bare
string. ``#`` starts a comment.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

DEFAULTS = {
    # allocator
    "lambda": 1.0,
    "rho": 100.0,
    "ts": 0.02,
    "w_u": 1.0,
    "w_s": 2.0,
    "w_v": "auto",
    "u_min": -0.4,
    "u_max": 0.4,
    "failures": [],
    # scenario
    "plant": "plant",
    "mode": "sparse",
    "controller": "",
    "disturbance": 1,
    "amplitude_per_cycle": 1.0,
    "t_end": 20.0,
    "reduced_order": "auto",
    "hankel_threshold": 1e-2,
    "design_damping": 0.08,
    "critical_hz": 0.564,
    "band_hz": 0.05,
    "prony_start": 1.0,
    "prony_order": "auto",
    "prony_decimate": 5,
    "fractions": [0.0, 0.1, 0.3, 0.5, 0.7, 0.8],
    # benchmark
    "seed": 0,
    "actuators": 10,
}

DESCRIPTIONS = {
    "lambda": "l1 gain on the command",
    "rho": "penalty on the virtual-control mismatch",
    "ts": "allocation / simulation step (s)",
    "w_u": "command weight (scalar or diagonal list)",
    "w_s": "slew weight (scalar or diagonal list)",
    "w_v": "modal priority weight; auto doubles per modal block: 2,2,4,4,8,8,...",
    "u_min": "lower command bound (scalar or list, pu)",
    "u_max": "upper command bound (scalar or list, pu)",
    "failures": "list of [actuator, fail_time, recover_time]",
    "plant": "prefix of the <prefix>_A/_B/_C.mtx.txt plant triple",
    "mode": "allocation mode: sparse | fixed | none",
    "controller": "prefix of a _Ak/_Bk/_Ck/_Dk controller; empty uses modal state feedback",
    "disturbance": "fault cycles (number) or {'kind', 'magnitude', 'frequency_hz', 'vector'}",
    "amplitude_per_cycle": "critical-mode initial amplitude per fault cycle",
    "t_end": "simulation length (s)",
    "reduced_order": "reduced model order; auto uses the Hankel threshold",
    "hankel_threshold": "relative Hankel value below which states are truncated",
    "design_damping": "modal feedback target damping ratio",
    "critical_hz": "critical mode frequency (Hz)",
    "band_hz": "frequency band for picking the critical mode from a Prony fit",
    "prony_start": "start of the Prony window (s after the disturbance)",
    "prony_order": "Prony order in complex pairs; auto is 2x the oscillatory mode count",
    "prony_decimate": "decimation factor applied before Prony",
    "fractions": "actuator failure fractions for sweeps",
    "seed": "benchmark seed",
    "actuators": "benchmark actuator count",
}


def parse_value(text):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_text(text, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = parse_value(value)
    return values


def format_value(value):
    if isinstance(value, str):
        return value
    return repr(value)


def show_config():
    width = max(len(k) for k in DEFAULTS)
    lines = [f"{k.ljust(width)} = {format_value(v)}    # {DESCRIPTIONS[k]}" for k, v in DEFAULTS.items()]
    return "\n".join(lines)


@dataclass
class RunConfig:
    subcommand: str = ""
    inputs: dict = field(default_factory=dict)
    output_dir: Path = Path(".")
    values: dict = field(default_factory=lambda: dict(DEFAULTS))
    seed: int = 0
    verbosity: int = 0

    @classmethod
    def load(cls, path=None, overrides=(), **kwargs):
        values = dict(DEFAULTS)
        if path is not None:
            values.update(parse_text(Path(path).read_text(), str(path)))
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} must look like key=value")
            key, value = item.split("=", 1)
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"unknown key {key!r}")
            values[key] = parse_value(value)
        return cls(values=values, **kwargs)

    def __getitem__(self, key):
        return self.values[key]

    def auto(self, key):
        """Value of ``key`` or ``None`` when it is set to ``auto``."""
        value = self.values[key]
        return None if value == "auto" else value
