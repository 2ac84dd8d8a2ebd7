"""Circular-route arithmetic: examples, identities, and a brute-force
crossing-time oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citymule.errors import GeometryError
from citymule.geometry import (
    Bus,
    RouteCircle,
    arc_distance,
    bus_position_at,
    next_crossing_time,
    wrap_position,
)

HOUR = 3600.0


def make_bus(p0: float, speed: float) -> Bus:
    return Bus("b", "r", p0, speed)


class TestArcDistance:
    def test_identical_points(self):
        assert arc_distance(5.0, 5.0, 15.0) == 0.0

    def test_half_circumference(self):
        assert arc_distance(0.0, 7.5, 15.0) == 7.5

    def test_wraparound(self):
        # (2 - 10) mod 15
        assert arc_distance(10.0, 2.0, 15.0) == pytest.approx(7.0, abs=1e-12)

    def test_invalid_circumference(self):
        with pytest.raises(GeometryError):
            arc_distance(0.0, 1.0, 0.0)
        with pytest.raises(GeometryError):
            arc_distance(0.0, 1.0, -3.0)

    def test_exhaustive_rational_grid_identities(self):
        # Exactly representable grid: C = 16, positions k/8.
        circumference = 16.0
        grid = [k / 8.0 for k in range(128)]
        for a in grid:
            assert arc_distance(a, a, circumference) == 0.0
        checked = 0
        for a in grid:
            for b in grid:
                if a == b:
                    continue
                total = arc_distance(a, b, circumference) + arc_distance(b, a, circumference)
                assert total == circumference
                checked += 1
        assert checked >= 1000


class TestBusPosition:
    def test_linear_motion(self):
        assert bus_position_at(make_bus(0.0, 20.0), 0.5 * HOUR, 15.0) == 10.0

    def test_wraparound(self):
        assert bus_position_at(make_bus(10.0, 20.0), 0.5 * HOUR, 15.0) == pytest.approx(
            5.0, abs=1e-9
        )

    def test_exact_full_loop(self):
        assert bus_position_at(make_bus(0.0, 20.0), 0.75 * HOUR, 15.0) == 0.0

    def test_negative_time_rejected(self):
        with pytest.raises(GeometryError):
            bus_position_at(make_bus(0.0, 20.0), -1.0, 15.0)

    @given(
        p0=st.floats(0.0, 15.0, exclude_max=True),
        speed=st.floats(1.0, 60.0),
        t=st.floats(0.0, 48 * HOUR),
    )
    @settings(max_examples=300)
    def test_periodicity(self, p0, speed, t):
        bus = make_bus(p0, speed)
        loop = 15.0 / bus.speed_kms()
        a = bus_position_at(bus, t, 15.0)
        b = bus_position_at(bus, t + loop, 15.0)
        delta = min(abs(a - b), 15.0 - abs(a - b))
        assert delta < 1e-9


class TestNextCrossing:
    def test_distance_over_speed(self):
        assert next_crossing_time(make_bus(0.0, 15.0), 7.5, 0.0, 15.0) == pytest.approx(
            0.5 * HOUR, abs=1e-9
        )

    def test_already_at_target(self):
        assert next_crossing_time(make_bus(7.5, 15.0), 7.5, 0.0, 15.0) == 0.0

    def test_from_offset_time(self):
        # bus at 12 km after 0.1 h; 8 km to go at 20 km/h
        got = next_crossing_time(make_bus(10.0, 20.0), 5.0, 0.1 * HOUR, 15.0)
        assert got == pytest.approx(0.5 * HOUR, abs=1e-9)

    @given(
        p0=st.floats(0.0, 15.0, exclude_max=True),
        speed=st.floats(1.0, 60.0),
        target=st.floats(0.0, 15.0, exclude_max=True),
        t_from=st.floats(0.0, 24 * HOUR),
    )
    @settings(max_examples=300)
    def test_substitution_returns_target(self, p0, speed, target, t_from):
        bus = make_bus(p0, speed)
        t = next_crossing_time(bus, target, t_from, 15.0)
        assert t_from <= t < t_from + 15.0 / bus.speed_kms() + 1e-9
        landed = bus_position_at(bus, t, 15.0)
        delta = min(abs(landed - target), 15.0 - abs(landed - target))
        assert delta < 1e-9

    def test_agrees_with_time_stepped_oracle(self):
        # 1,000 randomized instances against naive 0.1 s position scanning.
        rng = np.random.default_rng(424242)
        step = 0.1
        for _ in range(1000):
            circumference = rng.uniform(0.5, 30.0)
            speed = rng.uniform(5.0, 40.0)
            bus = make_bus(rng.uniform(0.0, circumference * 0.999999), speed)
            target = rng.uniform(0.0, circumference * 0.999999)
            t_from = rng.uniform(0.0, 2.0 * HOUR)
            exact = next_crossing_time(bus, target, t_from, circumference)

            # oracle: step the bus position and check each interval for
            # traversal of the target
            v = bus.speed_kms()
            n = int(math.ceil(circumference / v / step)) + 2
            times = t_from + step * np.arange(n)
            pos = np.mod(bus.initial_position + v * times, circumference)
            gap = np.mod(target - pos, circumference)
            if gap[0] == 0.0:
                stepped = t_from
            else:
                j = int(np.nonzero(gap <= v * step)[0][0])
                stepped = t_from + (j + 1) * step
            assert abs(exact - stepped) <= step + 1e-9


class TestTypes:
    def test_route_validation(self):
        with pytest.raises(GeometryError):
            RouteCircle("r", -1.0)
        with pytest.raises(GeometryError):
            RouteCircle("r", 10.0, stops=(10.0,))
        with pytest.raises(GeometryError):
            RouteCircle("r", 10.0, gateway_positions=(-0.1,))
        route = RouteCircle("r", 10.0, stops=(1.0,), gateway_positions=(1.0,))
        route.require_gateway()
        with pytest.raises(GeometryError):
            RouteCircle("r", 10.0).require_gateway()

    def test_bus_speed_positive(self):
        with pytest.raises(GeometryError):
            Bus("b", "r", 0.0, 0.0)

    def test_wrap_snaps_near_circumference(self):
        assert wrap_position(15.0 - 1e-12, 15.0) == 0.0
        assert wrap_position(15.0, 15.0) == 0.0
        assert wrap_position(-1e-12, 15.0) == 0.0
