"""Circular-route arithmetic.

A bus route is modelled as a circle; every position on it is an arc-length
offset in kilometres along the direction of travel, in [0, circumference).
Buses move at constant speed, so crossing times are exact and both the
analytic latency formulas and the event engine share these primitives.

Times are seconds, distances kilometres, speeds km/h throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import GeometryError

#: Positions within this distance (km) of the circumference snap to 0 so
#: that event scheduling stays stable at the wrap point.
WRAP_SNAP_KM = 1e-9

KMH_TO_KMS = 1.0 / 3600.0


def wrap_position(offset: float, circumference: float) -> float:
    """Normalize an arc offset into [0, circumference)."""
    if circumference <= 0.0:
        raise GeometryError(f"circumference must be positive, got {circumference}")
    r = offset % circumference
    if r < 0.0:  # offset % C can return exactly -0.0 or stray negatives
        r += circumference
    if circumference - r < WRAP_SNAP_KM or r >= circumference:
        r = 0.0
    return r


def arc_distance(from_pos: float, to_pos: float, circumference: float) -> float:
    """Travel distance from one arc position to another, along the
    direction of motion; in [0, circumference)."""
    return wrap_position(to_pos - from_pos, circumference)


@dataclass(frozen=True)
class RouteCircle:
    """A bus route collapsed to a circle of the round-trip length."""

    route_id: str
    circumference: float
    stops: tuple[float, ...] = ()
    gateway_positions: tuple[float, ...] = ()
    onroute_sensor_positions: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.circumference <= 0.0:
            raise GeometryError(
                f"route {self.route_id}: circumference must be positive, "
                f"got {self.circumference}"
            )
        for name, positions in (
            ("stop", self.stops),
            ("gateway", self.gateway_positions),
            ("sensor", self.onroute_sensor_positions),
        ):
            for p in positions:
                if not 0.0 <= p < self.circumference:
                    raise GeometryError(
                        f"route {self.route_id}: {name} position {p} outside "
                        f"[0, {self.circumference})"
                    )

    def require_gateway(self) -> None:
        if not self.gateway_positions:
            raise GeometryError(f"route {self.route_id} has no gateway")


@dataclass
class Bus:
    """Deterministic mover on a route: position(t) = p0 + v*t (mod C).

    ``speed`` is km/h (the configured unit); the buffer holds message ids
    in boarding order and is unbounded.
    """

    bus_id: str
    route_id: str
    initial_position: float
    speed: float
    buffer: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.speed <= 0.0:
            raise GeometryError(f"bus {self.bus_id}: speed must be positive")

    def speed_kms(self) -> float:
        return self.speed * KMH_TO_KMS

    def loop_time(self, circumference: float) -> float:
        """Seconds per full loop."""
        return circumference / self.speed_kms()


def bus_position_at(bus: Bus, t: float, circumference: float) -> float:
    """Arc position of a bus at time t (seconds)."""
    if t < 0.0:
        raise GeometryError(f"time must be nonnegative, got {t}")
    return wrap_position(bus.initial_position + bus.speed_kms() * t, circumference)


def next_crossing_time(
    bus: Bus, target: float, t_from: float, circumference: float
) -> float:
    """Earliest t >= t_from at which the bus is at ``target``.

    Always within one loop: t_from <= result < t_from + C/v.
    """
    position = bus_position_at(bus, t_from, circumference)
    distance = arc_distance(position, target, circumference)
    return t_from + distance / bus.speed_kms()
