"""Run configuration: a flat ``key = value`` file.

Grammar: one ``key = value`` per line; ``#`` starts a comment; blank lines
are ignored; keys are case-insensitive and dashes equal underscores. File
paths are resolved relative to the directory holding the config file.
Command-line flags override file values.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

PATH_KEYS = ("nodes", "arcs", "economics", "demand_history")


@dataclass
class RunConfig:
    nodes: Path | None = None
    arcs: Path | None = None
    economics: Path | None = None
    demand_history: Path | None = None
    truckload: int = 1
    capacity_cap: int = 1000
    max_leg_hours: float = 5.5
    speed: float = 70.0
    delay_multiplier: float = 3.0
    demand_quantile: float = 0.7
    scenario_count: int = 50
    gap_tol: float = 1e-6
    time_limit: float | None = None
    engine: str = "highs"
    horizon_days: int | None = None
    deadline_hours: float = 24.0
    overflow_penalty: float | None = None
    hub_cost_amortization: str = "amortize_fixed_over_horizon"
    degree_scope: str = "all"
    seed: int = 0

    def validate(self):
        if self.truckload < 1:
            raise ConfigError("truckload must be >= 1")
        if self.capacity_cap < 0:
            raise ConfigError("capacity_cap must be >= 0")
        if not 0 <= self.demand_quantile <= 1:
            raise ConfigError("demand_quantile must lie in [0, 1]")
        if self.scenario_count < 1:
            raise ConfigError("scenario_count must be >= 1")
        if self.delay_multiplier < 1:
            raise ConfigError("delay_multiplier must be >= 1")
        if not self.gap_tol >= 0:
            raise ConfigError("gap_tol must be >= 0")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ConfigError("time_limit must be positive")
        if self.horizon_days is not None and self.horizon_days < 1:
            raise ConfigError("horizon_days must be >= 1")
        if not self.deadline_hours > 0:
            raise ConfigError("deadline_hours must be positive")
        if self.degree_scope not in ("all", "hubs"):
            raise ConfigError("degree_scope must be 'all' or 'hubs'")
        return self

    def require_files(self, *keys):
        for key in keys or PATH_KEYS:
            p = getattr(self, key)
            if p is None:
                raise ConfigError(f"missing setting {key!r} (give it in the config file or as --{key.replace('_', '-')})")
            if not Path(p).is_file():
                raise FileNotFoundError(f"{p}: no such file ({key})")

    def updated(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


def _convert(name, ftype, text, base: Path):
    if text.lower() in ("none", ""):
        return None
    if name in PATH_KEYS:
        p = Path(text)
        return p if p.is_absolute() else base / p
    if "int" in ftype and "float" not in ftype:
        return int(text)
    if "float" in ftype:
        v = float(text)
        if math.isnan(v):
            raise ValueError("NaN")
        return v
    return text


def parse_config(text: str, base=".", source="<config>") -> RunConfig:
    types = {f.name: str(f.type) for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, types[key], value, Path(base))
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value {value!r} for {key}") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"{path}: cannot read config ({exc.strerror})") from exc
    return parse_config(text, path.parent, str(path))
