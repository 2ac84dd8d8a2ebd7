"""Closed-form delivery-latency estimates for planning and cross-checks.

For an on-route sensor the delivery delay decomposes into the wait for the
next bus (sensor-to-bus) plus the ride to the first gateway reached in the
direction of travel (bus-to-gateway); the total is strictly below two full
loops.  Off-route data additionally waits for a pedestrian at the sensor
and then for that pedestrian to reach transit, both supplied as expected
values by the caller.

These functions double as the oracle for the event engine: a simulated
single-route delivery must match `onroute_delay` at the generation time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import GeometryError
from .geometry import Bus, RouteCircle, arc_distance, bus_position_at


@dataclass(frozen=True)
class OnRouteDelay:
    """Stage breakdown of an on-route delivery, in seconds."""

    sensor_to_bus: float
    bus_to_gateway: float

    @property
    def total(self) -> float:
        return self.sensor_to_bus + self.bus_to_gateway


@dataclass(frozen=True)
class OffRouteDelay:
    """Stage breakdown of an off-route delivery, in seconds."""

    sensor_to_pedestrian: float
    pedestrian_to_bus: float
    sensor_to_bus: float
    bus_to_gateway: float

    @property
    def total(self) -> float:
        return (
            self.sensor_to_pedestrian
            + self.pedestrian_to_bus
            + self.sensor_to_bus
            + self.bus_to_gateway
        )


def _check_position(route: RouteCircle, position: float, what: str) -> None:
    if not 0.0 <= position < route.circumference:
        raise GeometryError(
            f"{what} position {position} outside [0, {route.circumference}) "
            f"on route {route.route_id}"
        )


def sensor_to_bus_delay(
    route: RouteCircle, bus: Bus, sensor: float, t: float
) -> float:
    """Seconds until the bus reaches the sensor, from time t."""
    _check_position(route, sensor, "sensor")
    position = bus_position_at(bus, t, route.circumference)
    return arc_distance(position, sensor, route.circumference) / bus.speed_kms()


def nearest_gateway(route: RouteCircle, from_position: float) -> float:
    """First gateway reached travelling forward from ``from_position``."""
    route.require_gateway()
    return min(
        route.gateway_positions,
        key=lambda g: arc_distance(from_position, g, route.circumference),
    )


def bus_to_gateway_delay(
    route: RouteCircle, bus: Bus, sensor: float, gateway: float | None = None
) -> float:
    """Seconds from pickup (bus at the sensor) to the delivery gateway.

    With several gateways the first one reached in the direction of travel
    is used unless an explicit gateway is given.
    """
    _check_position(route, sensor, "sensor")
    if gateway is None:
        gateway = nearest_gateway(route, sensor)
    else:
        _check_position(route, gateway, "gateway")
    return arc_distance(sensor, gateway, route.circumference) / bus.speed_kms()


def onroute_delay(
    route: RouteCircle,
    buses: Bus | Sequence[Bus],
    sensor: float,
    t: float,
    gateway: float | None = None,
) -> OnRouteDelay:
    """Delivery-delay breakdown for data generated at ``sensor`` at time t.

    With several buses the first-arriving one performs the pickup.
    """
    if isinstance(buses, Bus):
        buses = [buses]
    if not buses:
        raise GeometryError("at least one bus required")
    waits = [sensor_to_bus_delay(route, b, sensor, t) for b in buses]
    wait = min(waits)
    carrier = buses[waits.index(wait)]
    carry = bus_to_gateway_delay(route, carrier, sensor, gateway)
    return OnRouteDelay(sensor_to_bus=wait, bus_to_gateway=carry)


def onroute_delay_bound(route: RouteCircle, bus: Bus) -> float:
    """Strict upper bound on on-route delivery delay: two loops."""
    return 2.0 * route.circumference / bus.speed_kms()


def offroute_delay(
    sensor_to_pedestrian: float,
    pedestrian_to_bus: float,
    route: RouteCircle,
    buses: Bus | Sequence[Bus],
    boarding_point: float,
    t: float,
    gateway: float | None = None,
) -> OffRouteDelay:
    """Expected off-route delivery breakdown.

    The two pedestrian stages are expectations supplied by the caller; the
    tail reuses the on-route formulas with the boarding point playing the
    sensor's role.
    """
    if sensor_to_pedestrian < 0.0 or pedestrian_to_bus < 0.0:
        raise GeometryError("expected pedestrian delays must be nonnegative")
    tail = onroute_delay(route, buses, boarding_point, t, gateway)
    return OffRouteDelay(
        sensor_to_pedestrian=sensor_to_pedestrian,
        pedestrian_to_bus=pedestrian_to_bus,
        sensor_to_bus=tail.sensor_to_bus,
        bus_to_gateway=tail.bus_to_gateway,
    )


def offroute_delay_bound(
    max_sensor_to_pedestrian: float,
    max_pedestrian_to_bus: float,
    route: RouteCircle,
    bus: Bus,
) -> float:
    """Upper bound: worst pedestrian stages plus the on-route bound."""
    return (
        max_sensor_to_pedestrian
        + max_pedestrian_to_bus
        + onroute_delay_bound(route, bus)
    )
