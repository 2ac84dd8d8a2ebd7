"""Shared fixtures and scenario-building helpers."""

from __future__ import annotations

import math

import pytest

from citymule.geometry import Bus, RouteCircle
from citymule.scenario import (
    OFF_ROUTE,
    ON_ROUTE,
    PedestrianPlan,
    PedestrianVisit,
    Scenario,
    ScenarioConfig,
    SensorSpec,
)

HOUR = 3600.0


def single_route_scenario(
    circumference: float = 15.0,
    speed: float = 20.0,
    bus_at: float = 0.0,
    sensor_at: float = 5.0,
    gateway_at: float = 10.0,
    period: float = 1800.0,
    phase: float = 0.0,
    extra_buses: tuple[float, ...] = (),
) -> Scenario:
    """One route, one on-route sensor, one gateway; no pedestrians."""
    route = RouteCircle(
        "r0",
        circumference,
        stops=(gateway_at,),
        gateway_positions=(gateway_at,),
        onroute_sensor_positions=(sensor_at,),
    )
    buses = [Bus("r0-bus0", "r0", bus_at, speed)]
    buses += [Bus(f"r0-bus{i+1}", "r0", p, speed) for i, p in enumerate(extra_buses)]
    sensor = SensorSpec(
        "r0-sensor0",
        ON_ROUTE,
        generation_period=period,
        generation_phase=phase,
        route_id="r0",
        position=sensor_at,
    )
    return Scenario(
        seed=0,
        routes=[route],
        buses=buses,
        onroute_sensors=[sensor],
        offroute_sensors=[],
        config=ScenarioConfig(),
    )


def offroute_scenario(
    circumference: float = 15.0,
    speed: float = 20.0,
    gateway_at: float = 10.0,
    stop_at: float = 4.0,
    period: float = 1800.0,
    phase: float = 0.0,
) -> Scenario:
    """One route plus a single off-route sensor; visits are supplied by the
    caller as an explicit plan."""
    route = RouteCircle(
        "r0",
        circumference,
        stops=(stop_at, gateway_at),
        gateway_positions=(gateway_at,),
    )
    sensor = SensorSpec(
        "off0",
        OFF_ROUTE,
        generation_period=period,
        generation_phase=phase,
        pedestrian_arrival_mean=2 * HOUR,
        pedestrian_arrival_std=0.5 * HOUR,
    )
    return Scenario(
        seed=0,
        routes=[route],
        buses=[Bus("r0-bus0", "r0", 0.0, speed)],
        onroute_sensors=[],
        offroute_sensors=[sensor],
        config=ScenarioConfig(),
    )


def plan_with_visits(horizon: float, *visits: PedestrianVisit) -> PedestrianPlan:
    by_sensor: dict[int, list[PedestrianVisit]] = {}
    for v in visits:
        by_sensor.setdefault(v.sensor_index, []).append(v)
    n = max(by_sensor, default=-1) + 1
    return PedestrianPlan(
        horizon=horizon,
        visits_by_sensor=[sorted(by_sensor.get(i, []), key=lambda v: v.time) for i in range(n)],
    )


def snap_to_grid(scenario: Scenario, plan: PedestrianPlan, step: float = 0.1) -> None:
    """Align schedule instants to the step grid, as the stepped-oracle
    agreement contract requires."""
    for sensor in scenario.onroute_sensors + scenario.offroute_sensors:
        sensor.generation_period = max(step, step * round(sensor.generation_period / step))
        sensor.generation_phase = step * round(sensor.generation_phase / step)
    for visits in plan.visits_by_sensor:
        for visit in visits:
            visit.time = step * round(visit.time / step)
            visit.ready_time = step * round(visit.ready_time / step)


@pytest.fixture(scope="session")
def gtfs_loops_path() -> str:
    import pathlib

    return str(pathlib.Path(__file__).parent / "data" / "gtfs_loops")


@pytest.fixture(scope="session")
def gtfs_shaped_path() -> str:
    import pathlib

    return str(pathlib.Path(__file__).parent / "data" / "gtfs_shaped")
