"""Experiment configuration: sectioned ``key = value`` files plus environment overrides.

Example::

    [general]
    dimension = 4
    suite = decay
    seed = 0

    [potential]
    id = gaussian
    coupling = 0.1

Any key can be overridden by ``DISPLAB_<SECTION>_<KEY>`` (upper case).
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass

from .errors import UsageError

SUITES = ("specfun", "resolvent", "funcalc", "propagator", "oscint", "resonance", "decay", "all")
CHI1_PRESETS = ("smoothstep",)
ENV_PREFIX = "DISPLAB_"


@dataclass
class ExperimentConfig:
    # general
    dimension: int = 4
    suite: str = "all"
    seed: int = 0
    workers: int = 1
    out: str = "runs"
    # potential
    potential: str = "gaussian"
    coupling: float = 0.1
    # cutoff
    a: float = 0.05
    chi1: str = "smoothstep"
    hs_order: int = 3
    strip_width: float = 1.0
    # grids
    per_decade: int = 8
    r_max: float = 10.0
    sample_pairs: int = 16
    # time grid
    t_min: float = 1.0
    t_max: float = 100.0
    t_per_decade: int = 24
    # h-list for the decay trends
    h_values: tuple = (4.0, 8.0, 16.0, 32.0)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.dimension not in (4, 5, 6):
            raise UsageError(f"dimension must be 4, 5 or 6 (got {self.dimension})")
        if self.suite not in SUITES:
            raise UsageError(f"unknown suite {self.suite!r}; valid: {', '.join(SUITES)}")
        if self.chi1 not in CHI1_PRESETS:
            raise UsageError(f"unknown chi1 preset {self.chi1!r}; valid: {', '.join(CHI1_PRESETS)}")
        for name in ("per_decade", "sample_pairs", "t_per_decade", "workers", "hs_order"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        for name in ("r_max", "a", "strip_width", "t_min"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.t_max <= self.t_min:
            raise UsageError("t_max must exceed t_min")
        if not self.h_values or min(self.h_values) <= 0:
            raise UsageError("h values must be positive")

    def snapshot(self) -> dict:
        d = dataclasses.asdict(self)
        d["h_values"] = list(self.h_values)
        return d

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


# section -> {file key: field name}
SCHEMA = {
    "general": {"dimension": "dimension", "suite": "suite", "seed": "seed",
                "workers": "workers", "out": "out"},
    "potential": {"id": "potential", "coupling": "coupling"},
    "cutoff": {"a": "a", "chi1": "chi1", "hs_order": "hs_order", "strip_width": "strip_width"},
    "grids": {"per_decade": "per_decade", "r_max": "r_max", "sample_pairs": "sample_pairs"},
    "time": {"t_min": "t_min", "t_max": "t_max", "per_decade": "t_per_decade"},
    "h": {"values": "h_values"},
}


def _convert(fname: str, raw: str, where: str):
    default = getattr(ExperimentConfig, fname, None)
    if fname == "h_values":
        default = ()
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
        return raw.strip()
    except ValueError:
        raise UsageError(f"{where}: cannot parse {raw!r} for {fname}") from None


def _key_line(text: str, section: str, key: str) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip()
        elif cur == section and "=" in s and s.split("=", 1)[0].strip().lower() == key:
            return i
    return None


def parse_config(text: str = "", source: str = "<config>", env: dict | None = None) -> ExperimentConfig:
    """Parse config text, apply ``DISPLAB_*`` overrides from ``env`` (default ``os.environ``)."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise UsageError(f"{source}: {e}") from None
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise UsageError(f"{source}: unknown section [{section}]; valid: {', '.join(SCHEMA)}")
        for key, raw in cp.items(section):
            line = _key_line(text, section, key)
            where = f"{source}:{line}" if line else source
            if key not in SCHEMA[section]:
                raise UsageError(f"{where}: unknown key {key!r} in [{section}]; "
                                 f"valid: {', '.join(SCHEMA[section])}")
            fname = SCHEMA[section][key]
            values[fname] = _convert(fname, raw, where)
    env = os.environ if env is None else env
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        hit = [(s, k) for s in SCHEMA for k in SCHEMA[s] if rest == f"{s}_{k}"]
        if not hit:
            valid = [f"{ENV_PREFIX}{s.upper()}_{k.upper()}" for s in SCHEMA for k in SCHEMA[s]]
            raise UsageError(f"unknown override {name}; valid: {', '.join(valid)}")
        s, k = hit[0]
        values[SCHEMA[s][k]] = _convert(SCHEMA[s][k], raw, name)
    return ExperimentConfig(**values)


def load_config(path: str | None = None, env: dict | None = None) -> ExperimentConfig:
    if path is None:
        return parse_config("", env=env)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    return parse_config(text, path, env)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, fname in keys.items():
            v = getattr(cfg, fname)
            if isinstance(v, tuple):
                v = ", ".join(f"{x:g}" for x in v)
            lines.append(f"{key} = {v}")
        lines.append("")
    return "\n".join(lines)
