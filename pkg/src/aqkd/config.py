"""Flat ``key = value`` sweep configuration with ``[global]`` and ``[curve.<label>]`` sections.

Key names are the CLI flag names without the leading dashes. Unknown keys and
sections are errors: a typo in a physics parameter must never be ignored.
"""

from __future__ import annotations

import configparser
from pathlib import Path

import numpy as np

from .harness import CurveSpec, SweepSpec

CURVE_KEYS = {"G", "chi", "mu", "rounds", "alpha", "eta-d", "p-dark", "p-pol", "f-ec"}
GLOBAL_KEYS = CURVE_KEYS | {"L", "seed", "pulses", "max-pulses", "out", "takeoka-convention", "workers"}


class ConfigError(ValueError):
    pass


def parse_grid(text: str, cast=float) -> tuple:
    """``"a,b,c"`` or an inclusive range ``"start:stop:step"``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"range step must be positive, got {text!r}")
        values = np.arange(start, stop + step / 2, step)
        return tuple(cast(round(v, 10)) for v in values)
    values = tuple(cast(v) for v in text.replace(" ", "").split(",") if v)
    if not values:
        raise ConfigError("empty grid")
    return values


def _to_int(text) -> int:
    value = float(text)
    if value != int(value):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(value)


def _convert(key: str, value: str):
    try:
        if key in ("mu", "L"):
            return parse_grid(value)
        if key == "rounds":
            return parse_grid(value, _to_int)
        if key in ("seed", "pulses", "max-pulses", "workers"):
            return _to_int(value)
        if key in ("out", "takeoka-convention"):
            return value.strip()
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None


def read_config(path) -> tuple[dict, dict]:
    """Parse a config file into ``(global_values, {label: curve_values})``."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    with open(path) as fh:
        parser.read_file(fh)
    glob: dict = {}
    curves: dict = {}
    for section in parser.sections():
        if section == "global":
            allowed, target = GLOBAL_KEYS, glob
        elif section.startswith("curve.") and len(section) > 6:
            allowed, target = CURVE_KEYS, curves.setdefault(section[6:], {})
        else:
            raise ConfigError(f"unknown section [{section}] in {path}")
        for key, value in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{section}] of {path}")
            target[key] = _convert(key, value)
    return glob, curves


_SPEC_FIELDS = {
    "L": "lengths_km",
    "seed": "seed",
    "pulses": "pulses",
    "max-pulses": "max_pulses",
    "out": "out",
    "takeoka-convention": "takeoka_convention",
    "workers": "workers",
}
_CURVE_FIELDS = {
    "G": "gain",
    "chi": "chi",
    "mu": "mu",
    "rounds": "rounds",
    "alpha": "alpha",
    "eta-d": "eta_d",
    "p-dark": "p_dark",
    "p-pol": "p_pol",
    "f-ec": "f_ec",
}


def build_spec(glob: dict, curves: dict, overrides: dict | None = None, base: SweepSpec | None = None) -> SweepSpec:
    """Merge config values and CLI overrides (CLI wins) into a :class:`SweepSpec`."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    glob = {**glob, **overrides}
    base = base or SweepSpec(curves=())
    spec_kwargs = {_SPEC_FIELDS[k]: v for k, v in glob.items() if k in _SPEC_FIELDS}
    curve_defaults = {_CURVE_FIELDS[k]: v for k, v in glob.items() if k in _CURVE_FIELDS}
    curve_overrides = {_CURVE_FIELDS[k]: v for k, v in overrides.items() if k in _CURVE_FIELDS}
    built = []
    if curves:
        for label, values in curves.items():
            fields = {**curve_defaults, **{_CURVE_FIELDS[k]: v for k, v in values.items()}, **curve_overrides}
            built.append(_curve(label, fields))
    elif base.curves:
        for curve in base.curves:
            built.append(curve.replace(**curve_defaults))
    else:
        built.append(_curve("point", curve_defaults))
    return base.replace(curves=tuple(built), **spec_kwargs)


def _curve(label: str, fields: dict) -> CurveSpec:
    for key in ("mu", "rounds"):
        if key in fields and not isinstance(fields[key], tuple):
            fields[key] = (fields[key],)
    return CurveSpec(label=label, **fields)


def load_spec(path: str | Path, overrides: dict | None = None, base: SweepSpec | None = None) -> SweepSpec:
    glob, curves = read_config(path)
    return build_spec(glob, curves, overrides, base)
