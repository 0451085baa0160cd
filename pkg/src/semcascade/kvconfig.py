"""Reader for the flat ``key = value`` configuration files used across the CLI.

Lines starting with ``#`` or ``;`` are comments. Keys are case-insensitive.
List values are comma separated.
"""
from __future__ import annotations

import configparser
from pathlib import Path

from .errors import InvalidSpecError

_SECTION = "config"


def parse_kv(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise InvalidSpecError(f"unparseable config: {exc}") from exc
    return dict(parser[_SECTION])


def read_kv(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())


def as_float_list(value: str) -> list[float]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    try:
        return [float(v) for v in items]
    except ValueError as exc:
        raise InvalidSpecError(f"expected a list of numbers, got {value!r}") from exc


def as_str_list(value: str) -> list[str]:
    return [v.strip().lower() for v in value.split(",") if v.strip()]


def as_int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise InvalidSpecError(f"{key} must be an integer, got {value!r}") from exc


def as_float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise InvalidSpecError(f"{key} must be a number, got {value!r}") from exc
