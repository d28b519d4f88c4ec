"""Plain-text run configuration: ``key = value`` lines, ``#`` comments.

Each CLI subcommand binds the parsed map onto one of its dataclasses; keys that
are not fields of that dataclass are rejected.
"""
from __future__ import annotations

import dataclasses
import typing
from pathlib import Path


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(text: str, typ):
    origin = typing.get_origin(typ)
    if origin is typing.Union:  # Optional[X]
        args = [a for a in typing.get_args(typ) if a is not type(None)]
        if text.strip().lower() in ("none", ""):
            return None
        return _coerce(text, args[0])
    if origin in (tuple, list):
        inner = typing.get_args(typ)[0]
        items = [s for s in text.replace(";", ",").split(",") if s.strip()]
        return tuple(_coerce(s, inner) for s in items)
    if typ is bool:
        return _parse_bool(text)
    if typ is int:
        return int(text.strip())
    if typ is float:
        return float(text.strip())
    return text.strip()


class Config:
    """Flat string map with typed accessors."""

    def __init__(self, values: dict[str, str] | None = None, source: str = "<memory>"):
        self.values = dict(values or {})
        self.source = source

    @classmethod
    def parse(cls, text: str, source: str = "<string>") -> "Config":
        values: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ConfigError(f"{source}:{lineno}: empty key")
            if key in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            values[key] = value
        return cls(values, source)

    @classmethod
    def load(cls, path) -> "Config":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.parse(text, str(path))

    def get_str(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def get_int(self, key: str, default: int | None = None) -> int | None:
        return int(self.values[key]) if key in self.values else default

    def get_float(self, key: str, default: float | None = None) -> float | None:
        return float(self.values[key]) if key in self.values else default

    def get_bool(self, key: str, default: bool | None = None) -> bool | None:
        return _parse_bool(self.values[key]) if key in self.values else default

    def bind(self, cls, **overrides):
        """Instantiate dataclass ``cls`` from the map; unknown keys are an error."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(self.values) - set(fields))
        if unknown:
            raise ConfigError(f"{self.source}: unknown key(s) {', '.join(unknown)}")
        hints = typing.get_type_hints(cls)
        kwargs = {}
        for name, text in self.values.items():
            try:
                kwargs[name] = _coerce(text, hints[name])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{self.source}: bad value for {name}: {text!r}") from exc
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: {exc}") from exc


def echo(obj) -> list[str]:
    """Comment lines recording every resolved field of a config dataclass."""
    lines = []
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"# {f.name} = {value}")
    return lines
