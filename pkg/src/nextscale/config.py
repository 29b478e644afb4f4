"""Flat ``key=value`` experiment configuration.

Files hold one ``key=value`` per line; blank lines and ``#`` comments are
ignored. Command-line flags override file values. Unknown keys and invalid
enum values are rejected up front.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .exceptions import NextScaleError, PersistenceError


class ConfigError(NextScaleError, ValueError):
    """Malformed configuration: unknown key, bad value, bad syntax."""


@dataclass(frozen=True)
class Key:
    kind: str  # str, int, float, bool, enum, ints
    default: object
    help: str
    choices: tuple = ()


SCHEMA = {
    "feature": Key("str", "demo:blobs,8x8x4,0", "reference feature tensor, or demo:KIND,HxWxC,SEED"),
    "codebook": Key("str", "gen:32,auto,0,0.5", "codebook tensor, or gen:V,C|auto,SEED[,SCALE]"),
    "ladder": Key("str", "1x1,2x2,4x4,8x8", "scale ladder, coarse to fine"),
    "upsample": Key("enum", "nearest", "codec upsampler U", ("nearest", "linear")),
    "beta0": Key("float", 1.0, "initial guidance scale"),
    "decay": Key("enum", "linear", "guidance schedule", ("linear", "constant")),
    "prior": Key("enum", "dse", "prior construction", ("nearest", "linear", "dse", "dse_zero")),
    "interp": Key("enum", "linear", "interpolation inside dse", ("nearest", "linear")),
    "raw_copy": Key("bool", False, "embed coarse DCT coefficients without amplitude correction"),
    "cache_guided": Key("bool", False, "build the next prior from guided instead of raw logits"),
    "temperature": Key("float", 1.0, "sampling temperature"),
    "argmax": Key("bool", False, "greedy decoding"),
    "lambda": Key("float", 0.5, "oracle blend toward the upsampled previous scale"),
    "sigma": Key("float", 1.0, "oracle logit noise standard deviation"),
    "logit_scale": Key("float", 8.0, "oracle score of the teacher token"),
    "oracle_seed": Key("int", 0, "oracle noise seed"),
    "seeds": Key("ints", "0..49", "run seeds, e.g. 0..49 or 1,2,5"),
    "prefix": Key("int", 2, "teacher-forced scales for completion"),
    "variants": Key("enum", "both", "which runs to execute", ("both", "ssg", "baseline")),
}

_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def parse_int_list(text: str) -> tuple[int, ...]:
    """``"0..3,7"`` -> ``(0, 1, 2, 3, 7)``; ranges are inclusive."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ConfigError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif re.fullmatch(r"-?\d+", part):
            out.append(int(part))
        else:
            raise ConfigError(f"cannot parse integer list item {part!r}")
    return tuple(out)


def _coerce(name: str, key: Key, value):
    try:
        if key.kind == "str":
            return str(value)
        if key.kind == "int":
            return int(value)
        if key.kind == "float":
            return float(value)
        if key.kind == "bool":
            if isinstance(value, bool):
                return value
            return _BOOL[str(value).strip().lower()]
        if key.kind == "ints":
            return parse_int_list(value) if isinstance(value, str) else tuple(int(v) for v in value)
        if key.kind == "enum":
            if value not in key.choices:
                raise ConfigError(f"{name}={value!r}; expected one of {', '.join(key.choices)}")
            return value
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid value for {name}: {value!r}") from None
    raise AssertionError(key.kind)


class Config:
    """Typed view over defaults, then file values, then overrides."""

    def __init__(self, values=None, schema=SCHEMA):
        self.schema = schema
        self._values = {k: _coerce(k, v, v.default) for k, v in schema.items()}
        if values:
            self.update(values)

    def update(self, values: dict) -> "Config":
        for name, raw in values.items():
            if raw is None:
                continue
            if name not in self.schema:
                raise ConfigError(f"unknown config key {name!r}")
            self._values[name] = _coerce(name, self.schema[name], raw)
        return self

    @classmethod
    def parse(cls, text: str, source="<config>") -> "Config":
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        return cls(values)

    @classmethod
    def from_file(cls, path) -> "Config":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise PersistenceError(f"cannot read config {path}: {exc}") from exc
        return cls.parse(text, str(path))

    def __getitem__(self, name):
        if name not in self._values:
            raise ConfigError(f"unknown config key {name!r}")
        return self._values[name]

    def as_dict(self) -> dict:
        return dict(self._values)

    def get_int(self, name) -> int:
        return int(self[name])

    def get_float(self, name) -> float:
        return float(self[name])

    def get_path(self, name) -> Path:
        return Path(self[name])

    def get_enum(self, name) -> str:
        return self[name]

    def get_ints(self, name) -> tuple[int, ...]:
        return tuple(self[name])
