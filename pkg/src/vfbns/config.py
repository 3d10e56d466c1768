"""Run configuration: flat key = value files with sections.

Sections and keys (defaults in parentheses):

    [model]       gamma (1.4), epsilon (1.0), g (1.0), alpha (0.1),
                  N (200), dt_safety (0.9), t_end (20.0)
    [data]        kind (equilibrium), delta (0.0), shape (cos_bump)
    [integrator]  mode (imex), dt_max (1.0), dt_min (1e-14), dt_fixed (none)
    [schedule]    samples (65)
    [experiment]  eps_list (empty), n_list (empty)

Unknown sections or keys are rejected by name; every value error names the
offending key.  A parsed Config serializes back to canonical text that
re-parses to an identical Config (floats via repr, so bit-for-bit).
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

import numpy as np

from .initial_data import KINDS, SHAPES, DataFamily
from .integrate import StepPolicy
from .model_core import Params


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Config:
    gamma: float = 1.4
    epsilon: float = 1.0
    g: float = 1.0
    alpha: float = 0.1
    N: int = 200
    dt_safety: float = 0.9
    t_end: float = 20.0
    kind: str = "equilibrium"
    delta: float = 0.0
    shape: str = "cos_bump"
    mode: str = "imex"
    dt_max: float = 1.0
    dt_min: float = 1e-14
    dt_fixed: float | None = None
    samples: int = 65
    eps_list: tuple = ()
    n_list: tuple = ()

    def params(self) -> Params:
        return Params(gamma=self.gamma, epsilon=self.epsilon, g=self.g,
                      alpha=self.alpha, N=self.N, dt_safety=self.dt_safety,
                      t_end=self.t_end)

    def family(self) -> DataFamily:
        return DataFamily(kind=self.kind, delta=self.delta, shape=self.shape)

    def policy(self) -> StepPolicy:
        return StepPolicy(mode=self.mode, dt_safety=self.dt_safety,
                          dt_max=self.dt_max, dt_min=self.dt_min,
                          dt_fixed=self.dt_fixed)

    def schedule(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.samples)

    def with_(self, **kw) -> "Config":
        return replace(self, **kw)

    def to_text(self) -> str:
        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, tuple):
                return ", ".join(repr(x) for x in v)
            return repr(v) if not isinstance(v, str) else v

        out = io.StringIO()
        for section, keys in _SCHEMA.items():
            out.write(f"[{section}]\n")
            for key in keys:
                out.write(f"{key} = {fmt(getattr(self, key))}\n")
            out.write("\n")
        return out.getvalue()


_SCHEMA = {
    "model": ("gamma", "epsilon", "g", "alpha", "N", "dt_safety", "t_end"),
    "data": ("kind", "delta", "shape"),
    "integrator": ("mode", "dt_max", "dt_min", "dt_fixed"),
    "schedule": ("samples",),
    "experiment": ("eps_list", "n_list"),
}


def _parse_float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(key, f"not a number: {raw!r}") from None


def _parse_int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(key, f"not an integer: {raw!r}") from None


def parse_config(text: str) -> Config:
    """Parse and validate configuration text; unknown keys are rejected."""
    def fresh():
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str  # keys are case-sensitive (N vs n)
        return cp

    cp = fresh()
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError:
        # tolerate flat files by treating them as [model]
        cp = fresh()
        cp.read_string("[model]\n" + text)
    except configparser.Error as err:
        raise ConfigError("<file>", str(err)) from None

    values = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            values[key] = (f"{section}.{key}", raw.strip())

    kw = {}
    for key, (qkey, raw) in values.items():
        if key in ("gamma", "epsilon", "g", "alpha", "dt_safety", "t_end",
                   "delta", "dt_max", "dt_min"):
            kw[key] = _parse_float(qkey, raw)
        elif key in ("N", "samples"):
            kw[key] = _parse_int(qkey, raw)
        elif key == "dt_fixed":
            kw[key] = None if raw.lower() in ("none", "") else _parse_float(qkey, raw)
        elif key == "eps_list":
            kw[key] = tuple(_parse_float(qkey, s) for s in raw.split(",") if s.strip())
        elif key == "n_list":
            kw[key] = tuple(_parse_int(qkey, s) for s in raw.split(",") if s.strip())
        else:
            kw[key] = raw

    cfg = Config(**kw)
    _validate(cfg)
    return cfg


def _validate(cfg: Config):
    if not cfg.gamma > 1.0:
        raise ConfigError("model.gamma", "gamma must exceed 1")
    if not 0.0 < cfg.epsilon <= 1.0:
        raise ConfigError("model.epsilon", "epsilon must lie in (0, 1]")
    if not cfg.g > 0.0:
        raise ConfigError("model.g", "g must be positive")
    if not cfg.alpha > 0.0:
        raise ConfigError("model.alpha", "alpha must be positive")
    if cfg.N < 4:
        raise ConfigError("model.N", "N must be at least 4")
    if not cfg.dt_safety > 0.0:
        raise ConfigError("model.dt_safety", "dt_safety must be positive")
    if cfg.t_end < 0.0:
        raise ConfigError("model.t_end", "t_end must be nonnegative")
    if cfg.kind == "from_density":
        raise ConfigError("data.kind",
                          "from_density data requires the Python API")
    if cfg.kind not in KINDS:
        raise ConfigError("data.kind", f"unknown kind {cfg.kind!r}")
    if cfg.shape not in SHAPES:
        raise ConfigError("data.shape", f"unknown shape {cfg.shape!r}")
    if cfg.mode not in ("imex", "explicit_reference"):
        raise ConfigError("integrator.mode", f"unknown mode {cfg.mode!r}")
    if not 0.0 < cfg.dt_min < cfg.dt_max:
        raise ConfigError("integrator.dt_min", "need 0 < dt_min < dt_max")
    if cfg.dt_fixed is not None and not cfg.dt_fixed > 0.0:
        raise ConfigError("integrator.dt_fixed", "dt_fixed must be positive")
    if cfg.samples < 2:
        raise ConfigError("schedule.samples", "need at least 2 samples")
    if any(e <= 0.0 or e > 1.0 for e in cfg.eps_list):
        raise ConfigError("experiment.eps_list", "entries must lie in (0, 1]")
    if any(n < 4 for n in cfg.n_list):
        raise ConfigError("experiment.n_list", "entries must be at least 4")
