"""Parsing and formatting of quantities with explicit unit suffixes.

Internally the whole package works in kilometres for distance, seconds for
time, and km/h for configured speeds.  Configuration files and CLI flags
always carry an explicit suffix ("15km", "500m", "30min", "2h", "20km/h")
so that the Table-style parameter lists cannot be misread.
"""

from __future__ import annotations

import re

from .errors import ConfigurationError

_NUMBER = r"[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?"
_QUANTITY_RE = re.compile(rf"^\s*({_NUMBER})\s*([a-zA-Z/]*)\s*$")

_DURATION_FACTORS = {
    "s": 1.0,
    "sec": 1.0,
    "secs": 1.0,
    "second": 1.0,
    "seconds": 1.0,
    "min": 60.0,
    "mins": 60.0,
    "minute": 60.0,
    "minutes": 60.0,
    "h": 3600.0,
    "hr": 3600.0,
    "hrs": 3600.0,
    "hour": 3600.0,
    "hours": 3600.0,
    "d": 86400.0,
    "day": 86400.0,
    "days": 86400.0,
}

_DISTANCE_FACTORS = {
    "km": 1.0,
    "m": 1e-3,
    "meter": 1e-3,
    "meters": 1e-3,
}

_SPEED_FACTORS = {
    "km/h": 1.0,
    "kmh": 1.0,
    "kph": 1.0,
    "m/s": 3.6,
}


def _split(text: str | float, what: str) -> tuple[float, str]:
    if isinstance(text, (int, float)):
        raise ConfigurationError(
            f"{what} needs an explicit unit suffix, got bare number {text!r}"
        )
    match = _QUANTITY_RE.match(text)
    if not match:
        raise ConfigurationError(f"cannot parse {what} {text!r}")
    return float(match.group(1)), match.group(2)


def parse_duration(text: str | float) -> float:
    """Parse a duration like ``"30min"`` or ``"48h"`` into seconds."""
    value, unit = _split(text, "duration")
    try:
        return value * _DURATION_FACTORS[unit]
    except KeyError:
        raise ConfigurationError(
            f"unknown duration unit {unit!r} in {text!r} "
            f"(expected one of: s, min, h, d)"
        ) from None


def parse_distance(text: str | float) -> float:
    """Parse a distance like ``"15km"`` or ``"500m"`` into kilometres."""
    value, unit = _split(text, "distance")
    try:
        return value * _DISTANCE_FACTORS[unit]
    except KeyError:
        raise ConfigurationError(
            f"unknown distance unit {unit!r} in {text!r} (expected km or m)"
        ) from None


def parse_speed(text: str | float) -> float:
    """Parse a speed like ``"20km/h"`` or ``"5m/s"`` into km/h."""
    value, unit = _split(text, "speed")
    try:
        return value * _SPEED_FACTORS[unit]
    except KeyError:
        raise ConfigurationError(
            f"unknown speed unit {unit!r} in {text!r} (expected km/h or m/s)"
        ) from None


def format_duration(seconds: float) -> str:
    """Render seconds compactly for reports (not round-trip parseable)."""
    if seconds < 120.0:
        return f"{seconds:.1f}s"
    if seconds < 7200.0:
        return f"{seconds / 60.0:.1f}min"
    return f"{seconds / 3600.0:.2f}h"
