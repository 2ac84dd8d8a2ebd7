"""Unit-suffix parsing."""

import pytest

from citymule import units
from citymule.errors import ConfigurationError


@pytest.mark.parametrize(
    "text,seconds",
    [
        ("30s", 30.0),
        ("10min", 600.0),
        ("2h", 7200.0),
        ("48h", 172800.0),
        ("1.5hours", 5400.0),
        ("0.5d", 43200.0),
    ],
)
def test_durations(text, seconds):
    assert units.parse_duration(text) == seconds


@pytest.mark.parametrize(
    "text,km", [("15km", 15.0), ("500m", 0.5), ("0.001km", 0.001), ("2.5 km", 2.5)]
)
def test_distances(text, km):
    assert units.parse_distance(text) == km


@pytest.mark.parametrize("text,kmh", [("20km/h", 20.0), ("5m/s", 18.0), ("17.47kmh", 17.47)])
def test_speeds(text, kmh):
    assert units.parse_speed(text) == pytest.approx(kmh)


@pytest.mark.parametrize(
    "func,text",
    [
        (units.parse_duration, "10"),
        (units.parse_duration, 10),
        (units.parse_duration, "10parsec"),
        (units.parse_distance, "10s"),
        (units.parse_speed, "fast"),
        (units.parse_distance, ""),
    ],
)
def test_rejects_bad_units(func, text):
    with pytest.raises(ConfigurationError):
        func(text)


def test_format_duration():
    assert units.format_duration(30.0) == "30.0s"
    assert units.format_duration(600.0) == "10.0min"
    assert units.format_duration(7200.0) == "2.00h"
