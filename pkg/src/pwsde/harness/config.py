"""Experiment configuration.

Settings come from three layers: built-in defaults, an optional flat
config file, then command-line flags, each overriding the previous.
The file format is one ``key = value`` pair per line; blank lines and
lines starting with ``#`` are ignored.  Keys match the long command
line flag names.
"""

from dataclasses import dataclass, fields
from typing import Optional, Tuple


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: str = "step_function"
    scheme: str = "em"
    paths: int = 4096
    seed: int = 12345
    levels: Tuple[int, int] = (1, 7)
    threads: int = 1
    out: Optional[str] = None
    backend: Optional[str] = None
    # occupation settings
    occupation_eps: Tuple[float, ...] = (0.02, 0.04, 0.08, 0.16)
    occupation_steps: int = 1024
    # benchmark settings
    bench_level: int = 7
    bench_paths: int = 1024

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.scheme not in ("em", "gm", "both"):
            raise ConfigError(f"scheme must be em, gm or both, not {self.scheme!r}")
        if self.paths < 2:
            raise ConfigError("paths must be at least 2")
        lo, hi = self.levels
        if lo < 1 or hi <= lo:
            raise ConfigError(f"bad level range {lo}:{hi}; need 1 <= min < max")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.backend not in (None, "pure", "compiled"):
            raise ConfigError(f"backend must be pure or compiled, not {self.backend!r}")
        if any(e <= 0 for e in self.occupation_eps) or len(self.occupation_eps) < 2:
            raise ConfigError("occupation eps grid needs at least two positive values")
        if self.occupation_steps < 1 or self.bench_level < 1 or self.bench_paths < 1:
            raise ConfigError("counts must be positive")


def parse_levels(text):
    """Parse a ``k_min:k_max`` range."""
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ConfigError(f"levels must look like 2:7, got {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"levels must be integers, got {text!r}") from None
    return (lo, hi)


_PARSERS = {
    "model": str,
    "scheme": str,
    "paths": int,
    "seed": int,
    "levels": parse_levels,
    "threads": int,
    "out": str,
    "backend": str,
    "occupation_eps": lambda s: tuple(float(p) for p in str(s).split(",") if p.strip()),
    "occupation_steps": int,
    "bench_level": int,
    "bench_paths": int,
}


def read_config_file(path):
    """Parse a flat key = value file into a settings dict."""
    settings = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _PARSERS:
                known = ", ".join(sorted(_PARSERS))
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}; known keys: {known}")
            try:
                settings[key] = _PARSERS[key](value)
            except ConfigError:
                raise
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return settings


def build_config(file_settings=None, overrides=None):
    """Merge defaults, config file settings and explicit overrides."""
    merged = {}
    for layer in (file_settings or {}), (overrides or {}):
        for key, value in layer.items():
            if value is None:
                continue
            if key not in _PARSERS:
                raise ConfigError(f"unknown setting {key!r}")
            merged[key] = value
    valid = {f.name for f in fields(ExperimentConfig)}
    assert set(_PARSERS) == valid, "parser table out of sync with the config fields"
    return ExperimentConfig(**merged)
