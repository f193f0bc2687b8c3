"""Scenario files: JSON with unit-tagged quantities.

Every physical value carries its unit as a string such as ``"90 deg"``,
``"28 GHz"``, ``"0.005 m"``, ``"10 dB"`` or ``"20 dBm"``. Plain numbers are
accepted only for counts and dimensionless parameters. Parsing converts
everything to SI and linear units.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

from ..foundation import SPEED_OF_LIGHT

TOP_LEVEL = ("experiment", "seed", "geometry", "users", "noise", "params", "output")
SECTIONS = ("geometry", "noise", "params")

_UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "km": 1e3},
    "angle": {"deg": math.pi / 180, "rad": 1.0},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12},
    "power": {"lin": 1.0, "W": 1.0, "mW": 1e-3},
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")


class ConfigError(ValueError):
    """Invalid scenario; ``errors`` lists every violation found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


REQUIRED = object()


@dataclass(frozen=True)
class Field:
    kind: str
    default: object = REQUIRED
    low: float | None = None
    high: float | None = None
    choices: tuple = ()
    help: str = ""


def parse_quantity(value, kind):
    """Convert a unit-tagged string to SI (``power`` kinds to linear)."""
    if isinstance(value, bool) or not isinstance(value, str):
        raise ValueError(f"unit omitted: expected a string like '1 {next(iter(_UNITS[kind]))}', got {value!r}")
    match = _QUANTITY.match(value)
    if not match:
        raise ValueError(f"cannot parse quantity {value!r}")
    number, unit = float(match.group(1)), match.group(2)
    if kind == "power":
        if unit == "dB":
            return 10 ** (number / 10)
        if unit == "dBm":
            return 10 ** (number / 10) * 1e-3
    table = _UNITS[kind]
    if unit not in table:
        allowed = sorted(table) + (["dB", "dBm"] if kind == "power" else [])
        raise ValueError(f"unknown {kind} unit {unit!r} (allowed: {', '.join(allowed)})")
    return number * table[unit]


def _check_range(value, spec: Field):
    if spec.low is not None and value < spec.low:
        raise ValueError(f"must be >= {spec.low}, got {value}")
    if spec.high is not None and value > spec.high:
        raise ValueError(f"must be <= {spec.high}, got {value}")
    return value


def _as_int(value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _as_float(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


def _odd(value):
    value = _as_int(value)
    if value % 2 == 0:
        raise ValueError(f"antenna count must be odd (N = 2*n_half + 1), got {value}")
    return value


def _scalar(kind, value, spec):
    if kind == "int":
        return _check_range(_as_int(value), spec)
    if kind == "odd":
        return _check_range(_odd(value), spec)
    if kind == "float":
        return _check_range(_as_float(value), spec)
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError(f"expected a string, got {value!r}")
        return value
    if kind == "choice":
        if value not in spec.choices:
            raise ValueError(f"must be one of {', '.join(map(str, spec.choices))}, got {value!r}")
        return value
    if kind in _UNITS:
        return _check_range(parse_quantity(value, kind), spec)
    raise AssertionError(f"unknown field kind {kind}")


def parse_field(spec: Field, value):
    if spec.kind.endswith("_list"):
        if not isinstance(value, list) or not value:
            raise ValueError(f"expected a nonempty list, got {value!r}")
        return [_scalar(spec.kind[:-5], v, spec) for v in value]
    return _scalar(spec.kind, value, spec)


@dataclass
class ScenarioConfig:
    experiment: str
    seed: int
    geometry: dict = field(default_factory=dict)
    users: list = field(default_factory=list)
    noise: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def canonical_json(raw) -> str:
    return json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(raw) -> str:
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()


def _parse_section(name, given, schema, errors):
    out = {}
    if given is None:
        given = {}
    if not isinstance(given, dict):
        errors.append(f"{name}: expected an object")
        return out
    for key in sorted(set(given) - set(schema)):
        errors.append(f"{name}.{key}: unknown key")
    for key, spec in schema.items():
        if key not in given:
            if spec.default is REQUIRED:
                errors.append(f"{name}.{key}: required")
            else:
                out[key] = spec.default
            continue
        try:
            out[key] = parse_field(spec, given[key])
        except ValueError as exc:
            errors.append(f"{name}.{key}: {exc}")
    return out


def _resolve_wavelength(geometry, errors):
    if "wavelength" not in geometry and "frequency" not in geometry:
        return
    wl, freq = geometry.pop("wavelength", None), geometry.pop("frequency", None)
    if (wl is None) == (freq is None):
        errors.append("geometry: give exactly one of wavelength or frequency")
        return
    geometry["wavelength"] = wl if wl is not None else SPEED_OF_LIGHT / freq


def validate(raw, registry) -> ScenarioConfig:
    """Check a decoded scenario against the registry, reporting every violation."""
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError(["scenario must be a JSON object"])
    for key in sorted(set(raw) - set(TOP_LEVEL)):
        errors.append(f"{key}: unknown key")
    name = raw.get("experiment")
    if name not in registry:
        errors.append(f"experiment: unknown experiment {name!r}")
        raise ConfigError(errors)
    spec = registry[name]
    seed = raw.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        errors.append("seed: required unsigned 64-bit integer")
        seed = 0
    sections = {}
    for section in SECTIONS:
        schema = spec.schema.get(section, {})
        if not schema and raw.get(section):
            errors.append(f"{section}: not used by {name}")
        sections[section] = _parse_section(section, raw.get(section), schema, errors)
    geometry = sections["geometry"]
    _resolve_wavelength(geometry, errors)

    users = []
    user_schema = spec.schema.get("users")
    given_users = raw.get("users")
    if user_schema is None:
        if given_users:
            errors.append(f"users: not used by {name}")
    else:
        fields, low, high = user_schema
        if given_users is None:
            given_users = []
        if not isinstance(given_users, list):
            errors.append("users: expected a list")
            given_users = []
        if not low <= len(given_users) <= high:
            errors.append(f"users: expected between {low} and {high} users, got {len(given_users)}")
        for i, u in enumerate(given_users):
            users.append(_parse_section(f"users[{i}]", u, fields, errors))

    output = _parse_section("output", raw.get("output"), {
        "path": Field("str", None),
        "format": Field("choice", "csv", choices=("csv", "json")),
    }, errors)
    for check in spec.checks:
        try:
            check(geometry, users, sections["noise"], sections["params"])
        except KeyError:
            pass  # the missing field is already reported
        except ValueError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(name, seed, geometry, users, sections["noise"], sections["params"], output, raw)


def load_config(path, registry=None) -> ScenarioConfig:
    if registry is None:
        from .experiments import REGISTRY as registry
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from exc
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from exc
    return validate(raw, registry)
