"""Run configuration: a small ``key = value`` format with ``[section]`` headers.

Example::

    task = profile
    seed = 0

    [model]
    preset = inelastic
    d = 3
    e = 1/2

    [numerics]
    tol = 1e-10

    [output]
    dir = out

Keys before the first section are ``task`` and ``seed``.  Unknown keys,
repeated keys and unknown sections are errors.  This module only uses the
standard library so the command line can be parsed before numpy loads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Optional, Union

__all__ = ["ConfigError", "ModelSpec", "Numerics", "RunConfig", "parse_config", "TASKS", "PRESETS"]

TASKS = ("spectral", "profile", "evolve", "moments", "invert")
PRESETS = ("elastic", "thermostat", "inelastic", "file")

Number = Union[int, float, Fraction]


class ConfigError(ValueError):
    """Invalid configuration text or value."""


def _number(text: str) -> Number:
    try:
        if "/" in text:
            return Fraction(text)
        if text.lstrip("+-").isdigit():
            return int(text)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad number {text!r}") from exc


def _int(text: str) -> int:
    v = _number(text)
    if not isinstance(v, int):
        raise ValueError(f"expected an integer, got {text!r}")
    return v


def _float(text: str) -> float:
    return float(_number(text))


def _str(text: str) -> str:
    if not text:
        raise ValueError("empty value")
    return text


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _window(text: str) -> Optional[tuple]:
    if text.lower() == "none":
        return None
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma separated numbers")
    return (_float(parts[0]), _float(parts[1]))


@dataclass
class ModelSpec:
    preset: str = ""
    d: int = 3
    e: Number = Fraction(1, 2)
    m: Number = 1
    theta: Number = 1
    g: Number = 1
    n_quad: int = 64
    file: str = ""


@dataclass
class Numerics:
    grid_n: int = 2048
    x_min: float = 1e-8
    x_max: float = 1e6
    tol: float = 1e-10
    max_iter: int = 1000
    p: float = 1.0
    dt: float = 1e-2
    t_end: float = 10.0
    output_every: float = 0.1
    x_stride: int = 16
    u0: str = "exp"
    reference: bool = False
    S: int = 8
    p_points: int = 200
    p_max: float = 8.0
    dim: int = 3
    r_max: float = 10.0
    r_points: int = 401
    tail_window: Optional[tuple] = None


@dataclass
class RunConfig:
    """Validated run configuration; exactly one task per run."""

    task: str
    model: ModelSpec
    numerics: Numerics = field(default_factory=Numerics)
    output_dir: str = "."
    seed: int = 0
    threads: int = 1

    def echo(self) -> list:
        """Resolved parameters as ``section.key=value`` strings, in a fixed order.

        The output directory is left out so that runs differing only in
        where they write produce identical files.
        """
        out = [f"task={self.task}", f"seed={self.seed}"]
        out += [f"model.{f.name}={getattr(self.model, f.name)}" for f in fields(self.model)]
        out += [f"numerics.{f.name}={getattr(self.numerics, f.name)}"
                for f in fields(self.numerics)]
        return out


_TOP = {"task": _str, "seed": _int}
_SECTIONS = {
    "model": {"preset": _str, "d": _int, "e": _number, "m": _number, "theta": _number,
              "g": _number, "n_quad": _int, "file": _str},
    "numerics": {"grid_n": _int, "x_min": _float, "x_max": _float, "tol": _float,
                 "max_iter": _int, "p": _float, "dt": _float, "t_end": _float,
                 "output_every": _float, "x_stride": _int, "u0": _str, "reference": _bool,
                 "S": _int, "p_points": _int, "p_max": _float, "dim": _int, "r_max": _float,
                 "r_points": _int, "tail_window": _window},
    "output": {"dir": _str},
}


def _parse_value(section: Optional[str], key: str, text: str):
    table = _TOP if section is None else _SECTIONS[section]
    if key not in table:
        where = "top level" if section is None else f"[{section}]"
        raise ConfigError(f"unknown key {key!r} in {where}")
    try:
        return table[key](text)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from exc


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Parse and validate configuration text.

    ``overrides`` maps ``"section.key"`` (or ``"task"``/``"seed"``) to raw
    string values and is applied after the text, with the same checks.

    Raises
    ------
    ConfigError
        With the line number for syntax errors and the key name for bad values.
    """
    values: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("["):
                if not line.endswith("]"):
                    raise ConfigError("unterminated section header")
                section = line[1:-1].strip()
                if section not in _SECTIONS:
                    raise ConfigError(f"unknown section [{section}]")
                continue
            if "=" not in line:
                raise ConfigError("expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ConfigError("empty key")
            full = key if section is None else f"{section}.{key}"
            if full in values:
                raise ConfigError(f"duplicate key {key!r}")
            values[full] = _parse_value(section, key, val)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    for full, val in (overrides or {}).items():
        section, _, key = full.rpartition(".")
        if section and section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in override {full!r}")
        values[full] = _parse_value(section or None, key, str(val))
    return _build(values)


def _build(values: dict) -> RunConfig:
    if "task" not in values:
        raise ConfigError("missing required key 'task'")
    if "model.preset" not in values:
        raise ConfigError("missing required key 'preset' in [model]")
    model, num = ModelSpec(), Numerics()
    for full, val in values.items():
        section, _, key = full.rpartition(".")
        if section == "model":
            setattr(model, key, val)
        elif section == "numerics":
            setattr(num, key, val)
    cfg = RunConfig(values["task"], model, num, values.get("output.dir", "."),
                    values.get("seed", 0))
    _validate(cfg)
    return cfg


def _require(cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(f"key {key!r}: {msg}")


def _validate(cfg: RunConfig):
    m, n = cfg.model, cfg.numerics
    _require(cfg.task in TASKS, "task", f"must be one of {', '.join(TASKS)}")
    _require(cfg.seed >= 0, "seed", "must be nonnegative")
    _require(m.preset in PRESETS, "preset", f"must be one of {', '.join(PRESETS)}")
    _require(m.preset != "file" or bool(m.file), "file", "required when preset = file")
    _require(m.d >= 1, "d", "must be a positive integer")
    _require(0 < m.e <= 1, "e", "must lie in (0, 1]")
    _require(m.m > 0, "m", "must be positive")
    _require(m.theta > 0, "theta", "must be positive")
    _require(m.g > 0, "g", "must be positive")
    _require(m.n_quad >= 2, "n_quad", "must be at least 2")
    _require(n.grid_n >= 64, "grid_n", "must be at least 64")
    _require(0 < n.x_min < n.x_max, "x_min", "need 0 < x_min < x_max")
    for key in ("tol", "dt", "t_end", "output_every", "p", "p_max", "r_max"):
        _require(getattr(n, key) > 0, key, "must be positive")
    _require(n.max_iter >= 1, "max_iter", "must be at least 1")
    _require(n.x_stride >= 1, "x_stride", "must be at least 1")
    _require(n.S >= 2, "S", "must be at least 2")
    _require(n.p_points >= 2, "p_points", "must be at least 2")
    _require(n.r_points >= 3, "r_points", "must be at least 3")
    _require(n.dim in (1, 3), "dim", "must be 1 or 3")
    if n.tail_window is not None:
        lo, hi = n.tail_window
        _require(0 < lo < hi <= n.r_max, "tail_window", "need 0 < lo < hi <= r_max")
