from __future__ import annotations

import logging
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping, Optional

from django.conf import settings

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

TRUE_VALUES = ("true", "1", "yes", "on")
FALSE_VALUES = ("false", "0", "no", "off")


def _coerce(key: str, raw: str, default: Any) -> Any:
    """
    Convert a raw text value to the type of the key's default.
    """
    text = raw.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in TRUE_VALUES:
            return True
        if low in FALSE_VALUES:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    return text


def parse_config_text(text: str, defaults: Mapping[str, Any]) -> dict[str, Any]:
    """
    Parse `key = value` lines; `#` starts a comment, blank lines are ignored.
    Unknown keys and repeated keys are rejected.
    """
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: key {key!r} set twice")
        values[key] = _coerce(key, raw, defaults[key])
    return values


class Config:
    """Immutable flat key-value configuration layered over `settings.CUSP_DEFAULTS`."""

    def __init__(self, overrides: Optional[Mapping[str, Any]] = None, defaults=None):
        base = dict(defaults if defaults is not None else settings.CUSP_DEFAULTS)
        for key, value in (overrides or {}).items():
            if key not in base:
                raise ConfigError(f"unknown key {key!r}")
            if isinstance(value, str) and not isinstance(base[key], str):
                value = _coerce(key, value, base[key])
            base[key] = value
        self._values = MappingProxyType(base)

    @classmethod
    def from_text(cls, text: str) -> "Config":
        defaults = settings.CUSP_DEFAULTS
        return cls(parse_config_text(text, defaults), defaults)

    @classmethod
    def from_file(cls, path: Optional[str | Path]) -> "Config":
        if path is None:
            return cls()
        text = Path(path).read_text(encoding="utf-8")
        logger.debug("Loaded config from %s", path)
        return cls.from_text(text)

    def __getitem__(self, key: str) -> Any:
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown key {key!r}") from None

    def get(self, key: str, default: Any = None) -> Any:
        return self._values.get(key, default)

    def section(self, prefix: str) -> dict[str, Any]:
        """All keys under `prefix.` with the prefix stripped."""
        head = prefix + "."
        return {k[len(head):]: v for k, v in self._values.items() if k.startswith(head)}

    def replace(self, **changes: Any) -> "Config":
        """Copy with dotted keys given as `orc__delta=0.0`."""
        updated = dict(self._values)
        for name, value in changes.items():
            key = name.replace("__", ".")
            if key not in updated:
                raise ConfigError(f"unknown key {key!r}")
            updated[key] = value
        return Config(updated, defaults=updated)

    def as_text(self) -> str:
        lines = []
        for key, value in self._values.items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def items(self):
        return self._values.items()
