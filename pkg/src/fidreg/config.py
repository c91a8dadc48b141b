"""Flat key/value config blocks.

All on-disk configs use the same trivial format: one ``key = value`` pair per
line, ``#`` comments, blank lines ignored. Values keep full round-trip float
precision (shortest decimal that parses back exactly, i.e. Python ``repr``).
"""

from __future__ import annotations

from .errors import ConfigError


def format_float(x: float) -> str:
    """Shortest decimal representation that round-trips the float exactly."""
    return repr(float(x))


def format_triple(v) -> str:
    return " ".join(format_float(c) for c in v)


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse a flat key/value block into a string dict.

    Raises ConfigError naming the offending 1-based line on anything that is
    not ``key = value``, a comment, or a blank line.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"config line {lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def format_kv(pairs: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())


def kv_float(kv: dict[str, str], key: str) -> float:
    try:
        return float(kv[key])
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: not a number: {kv[key]!r}") from exc


def kv_int(kv: dict[str, str], key: str) -> int:
    try:
        return int(kv[key], 10)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: not an integer: {kv[key]!r}") from exc


def kv_bool(kv: dict[str, str], key: str) -> bool:
    value = kv[key].lower()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise ConfigError(f"config key {key!r}: not a boolean: {kv[key]!r}")


def kv_triple(kv: dict[str, str], key: str) -> tuple[float, float, float]:
    parts = kv[key].split()
    if len(parts) != 3:
        raise ConfigError(f"config key {key!r}: expected 3 numbers, got {kv[key]!r}")
    try:
        x, y, z = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: not numeric: {kv[key]!r}") from exc
    return (x, y, z)


def require_keys(kv: dict[str, str], required: tuple[str, ...], known: tuple[str, ...]) -> None:
    for key in required:
        if key not in kv:
            raise ConfigError(f"config missing required key {key!r}")
    for key in kv:
        if key not in known:
            raise ConfigError(f"config has unknown key {key!r}")
