"""`key = value` scenario files.

Blank lines and ``#`` comments are ignored. Keys are exactly the Scenario
field names; tuples are comma separated. The ``ANCHORROUTE_SEED`` env var
replaces the file's seed, and ``--set`` overrides beat both.
"""

from __future__ import annotations

import math
import os
from dataclasses import fields
from typing import Iterable, Mapping, Optional

from .sim import Scenario, ScenarioError

ENV_SEED = "ANCHORROUTE_SEED"
_TYPES = {f.name: f.type for f in fields(Scenario)}
_DEFAULTS = Scenario()


class ConfigError(ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


def _convert(key: str, raw: str):
    default = getattr(_DEFAULTS, key)
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        if not raw:
            return ()
        parts = [p.strip() for p in raw.split(",")]
        if key in ("sweep_densities", "sweep_seeds"):
            return tuple(int(p) for p in parts)
        return tuple(float(p) for p in parts)
    return raw


def parse_lines(lines: Iterable[str]) -> dict:
    """Raw key/value pairs with line numbers checked; values stay strings."""
    out = {}
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"expected 'key = value', got {text!r}", lineno)
        key, value = (s.strip() for s in text.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        out[key] = (value, lineno)
    return out


def build_scenario(values: Mapping[str, tuple], overrides: Iterable[str] = (),
                   env: Optional[Mapping[str, str]] = None) -> Scenario:
    env = os.environ if env is None else env
    kwargs = {}
    for key, (raw, lineno) in values.items():
        try:
            kwargs[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
    if env.get(ENV_SEED):
        try:
            kwargs["seed"] = int(env[ENV_SEED])
        except ValueError:
            raise ConfigError(f"{ENV_SEED} must be an integer") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r} in --set")
        try:
            kwargs[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    try:
        return Scenario(**kwargs)
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str, overrides: Iterable[str] = (), env=None) -> Scenario:
    return build_scenario(parse_lines(text.splitlines()), overrides, env)


def load_config(path: str, overrides: Iterable[str] = (), env=None) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides, env)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def serialize(sc: Scenario) -> str:
    """Every field, one per line; parse_config(serialize(sc)) == sc."""
    return "".join(f"{f.name} = {_fmt(getattr(sc, f.name))}\n" for f in fields(Scenario))
