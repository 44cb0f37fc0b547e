"""Run configuration: parsing, validation, defaults, round-trip.

Configs are flat JSON objects.  Unknown keys are rejected with the key
name; every default is materialized on parse so the manifest records the
exact values a run used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

COMMANDS = ("growth-rate", "alpha-sweep", "evolve-linear", "evolve-nonlinear",
            "escape-time", "stability-suite", "verify-all")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "growth-rate"
    grid: str = "32x32"
    lengths: list = None
    gravity_axis: int = -1
    profile: str = "linear(1,1)"
    mu: float = 0.1
    g: float = 1.0
    seed: int = 0
    out: str | None = None
    parallelism: int = 1
    fp_tol: float = 1e-8
    residual_tol: float = 1e-6
    dt: float | None = None
    t_end: float | None = None
    n_random: int = 20
    deltas: list = field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3, 1.25e-3])
    epsilon0: float = 0.05
    amplitudes: list = field(default_factory=lambda: [1e-3, 1e-2, 1e-1])
    s_count: int = 9

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command {self.command!r}; "
                              f"choose from {COMMANDS}")
        self.cells = _parse_grid(self.grid)
        if self.lengths is None:
            self.lengths = [1.0] * len(self.cells)
        if len(self.lengths) != len(self.cells):
            raise ConfigError("lengths: must match grid dimension "
                              f"({len(self.cells)})")
        for name in ("fp_tol", "residual_tol", "epsilon0", "mu", "g"):
            if not (float(getattr(self, name)) > 0):
                raise ConfigError(f"{name}: must be positive")
        for name in ("dt", "t_end"):
            v = getattr(self, name)
            if v is not None and not (float(v) > 0):
                raise ConfigError(f"{name}: must be positive when given")
        if self.parallelism < 1:
            raise ConfigError("parallelism: must be >= 1")
        if self.n_random < 0:
            raise ConfigError("n_random: must be >= 0")
        if self.s_count < 2:
            raise ConfigError("s_count: need at least 2 samples")
        self.seed = int(self.seed)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _parse_grid(spec) -> tuple[int, ...]:
    if isinstance(spec, (list, tuple)):
        parts = list(spec)
    else:
        parts = str(spec).lower().split("x")
    try:
        cells = tuple(int(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"grid: cannot parse {spec!r}; want e.g. \"32x32\"")
    if len(cells) not in (2, 3):
        raise ConfigError(f"grid: need 2 or 3 axes, got {len(cells)}")
    if any(n < 4 for n in cells):
        raise ConfigError("grid: need at least 4 cells per axis")
    return cells


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return RunConfig(**data)


def apply_override(cfg_dict: dict, assignment: str) -> dict:
    """Apply a single "key=value" override; values parse as JSON when
    possible, else stay strings."""
    key, sep, value = assignment.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {assignment!r} must be key=value")
    if key not in _FIELD_NAMES:
        raise ConfigError(f"unknown config key: {key}")
    try:
        cfg_dict[key] = json.loads(value)
    except json.JSONDecodeError:
        cfg_dict[key] = value
    return cfg_dict
