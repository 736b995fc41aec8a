"""Tracker configuration and its plain-text ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from typing import Any, Mapping, Optional

from .errors import ConfigError

MODES = ("memory", "baseline_mosse", "baseline_csk")


@dataclass(frozen=True)
class TrackerConfig:
    mode: str = "memory"
    gamma: float = 0.15
    lam: float = 1e-4
    kernel: str = "gaussian"
    kernel_sigma: float = 0.5
    cell_size: int = 4
    n_orientations: int = 9
    padding: float = 2.0
    # lower bound on the search window, in cells per axis
    min_window_cells: int = 12
    cluster_interval: int = 50
    pool_capacity: int = 400
    rho_rel: float = 1.0
    n0: int = 40
    eps_factor: float = 1.2
    max_memories: int = 10
    max_memory_samples: int = 100
    sigma1: float = 1e-3
    sigma2: float = 1e-2
    psr_threshold: float = 30.0
    # 0 means half the search window
    rescan_stride: int = 0
    rescan: bool = True
    # detections per frame, each re-centred on the previous estimate
    detect_passes: int = 2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if self.kernel not in ("gaussian", "linear"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if not self.kernel_sigma > 0:
            raise ConfigError("kernel_sigma must be positive")
        if not self.padding >= 1.0:
            raise ConfigError("padding must be >= 1")
        for name in ("cell_size", "cluster_interval", "pool_capacity", "max_memories",
                     "max_memory_samples", "min_window_cells", "detect_passes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_orientations < 2:
            raise ConfigError("n_orientations must be >= 2")
        if self.n0 < 2:
            raise ConfigError("n0 must be >= 2")
        if self.n0 > self.pool_capacity:
            raise ConfigError("n0 cannot exceed pool_capacity")
        for name in ("rho_rel", "eps_factor", "sigma1", "sigma2", "rescan_stride"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    def replace(self, **changes) -> "TrackerConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: Optional["TrackerConfig"] = None) -> "TrackerConfig":
        """Build a config from string or typed values, on top of ``base``."""
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        changes = {}
        for key, raw in values.items():
            name = ALIASES.get(key, key)
            if name not in types:
                raise ConfigError(f"unknown configuration key {key!r}")
            changes[name] = _coerce(name, types[name], raw)
        return dataclasses.replace(base, **changes)

    @classmethod
    def from_file(cls, path: str | os.PathLike, base: Optional["TrackerConfig"] = None) -> "TrackerConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(parse_config_text(fh.read()), base)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


# alternative spellings accepted in files and mappings
ALIASES = {"lambda": "lam", "cluster-interval": "cluster_interval"}


def _coerce(name: str, typ: str, raw: Any):
    try:
        if typ == "bool":
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(str(raw).strip()) if not isinstance(raw, (int, float)) else int(raw)
        if typ == "float":
            return float(raw)
        return str(raw).strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out
