"""Deterministic event-driven simulator.

`run` turns a scenario plus horizon into per-message lifecycle stamps.
Contact rules: a bus crossing a sensor takes the sensor's whole buffer; a
bus crossing a gateway delivers everything it carries; pedestrians empty
off-route sensors and later hand the batch to a bus (or, with small
probability, straight to a gateway).  There is never bus-to-bus or
pedestrian-to-pedestrian forwarding, buffers are unbounded, and contacts
are instantaneous with guaranteed full transfer.

The run is pure: all randomness lives in the scenario and its pedestrian
plan, both of which are sampled before the event loop starts.  Events
execute in (time, sequence) order, strictly before the horizon; a message
generated at the same instant as a contact is included in the pickup.

The inner loop runs in the compiled extension `citymule._core` when it is
installed, falling back to the bit-identical pure-Python core otherwise
(see `active_core`; set CITYMULE_PURE_PYTHON=1 to force the fallback).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _core_py
from .errors import ConfigurationError, InvariantViolation
from .scenario import (
    OFF_ROUTE,
    ON_ROUTE,
    PedestrianPlan,
    Scenario,
    sample_pedestrian_plan,
)

try:
    from . import _core as _core_c
except ImportError:
    _core_c = None

PATH_NAMES = {
    _core_py.PATH_ONROUTE: "sensor-bus-gateway",
    _core_py.PATH_VIA_BUS: "sensor-pedestrian-bus-gateway",
    _core_py.PATH_DIRECT: "sensor-pedestrian-gateway",
}


def available_cores() -> list[str]:
    cores = ["python"]
    if _core_c is not None:
        cores.insert(0, "compiled")
    return cores


def active_core() -> str:
    if os.environ.get("CITYMULE_PURE_PYTHON"):
        return "python"
    return "compiled" if _core_c is not None else "python"


@dataclass
class CompiledPlan:
    """Array form of a scenario consumed by the event-loop cores."""

    horizon: float
    circumference: np.ndarray
    bus_route: np.ndarray
    bus_p0: np.ndarray
    bus_v_kms: np.ndarray
    bus_loop_s: np.ndarray
    point_offset: np.ndarray
    point_pos: np.ndarray
    point_gateway: np.ndarray
    point_sensor_offset: np.ndarray
    point_sensor_idx: np.ndarray
    msg_offset: np.ndarray
    msg_t_gen: np.ndarray
    visit_sensor: np.ndarray
    visit_time: np.ndarray
    visit_ready: np.ndarray
    visit_direct: np.ndarray
    visit_bus: np.ndarray
    visit_pos: np.ndarray
    visit_pos_gateway: np.ndarray
    # outputs, filled by the core
    t_ped: np.ndarray = None
    t_board: np.ndarray = None
    t_deliv: np.ndarray = None
    path: np.ndarray = None

    def __post_init__(self) -> None:
        n = len(self.msg_t_gen)
        self.t_ped = np.full(n, np.nan)
        self.t_board = np.full(n, np.nan)
        self.t_deliv = np.full(n, np.nan)
        self.path = np.full(n, -1, dtype=np.int8)


def generation_times(period: float, phase: float, horizon: float) -> np.ndarray:
    """All instants phase + k*period strictly before the horizon."""
    if horizon <= phase:
        return np.empty(0)
    count = int(math.ceil((horizon - phase) / period)) + 1
    times = phase + period * np.arange(count, dtype=np.float64)
    return times[times < horizon]


def compile_plan(
    scenario: Scenario, horizon: float, plan: PedestrianPlan
) -> CompiledPlan:
    route_index = {r.route_id: i for i, r in enumerate(scenario.routes)}
    n_routes = len(scenario.routes)
    circumference = np.array([r.circumference for r in scenario.routes])

    bus_route = np.array(
        [route_index[b.route_id] for b in scenario.buses], dtype=np.int32
    )
    bus_p0 = np.array([b.initial_position for b in scenario.buses])
    bus_v_kms = np.array([b.speed_kms() for b in scenario.buses])
    with np.errstate(divide="ignore"):
        bus_loop_s = circumference[bus_route] / bus_v_kms if len(bus_route) else np.empty(0)

    sensors = list(scenario.onroute_sensors) + list(scenario.offroute_sensors)
    n_onroute = len(scenario.onroute_sensors)

    # Marked points: positions on each route where a sensor sits and/or a
    # gateway stands, grouped by exact position so that a co-located
    # sensor+gateway is one event with pickup before delivery.
    point_offset = [0]
    point_pos: list[float] = []
    point_gateway: list[int] = []
    point_sensor_offset = [0]
    point_sensor_idx: list[int] = []
    for r, route in enumerate(scenario.routes):
        marked: dict[float, list[int]] = {}
        for g in route.gateway_positions:
            marked.setdefault(g, [])
        for s_idx in range(n_onroute):
            sensor = sensors[s_idx]
            if route_index[sensor.route_id] == r:
                marked.setdefault(sensor.position, []).append(s_idx)
        gateways = set(route.gateway_positions)
        for pos in sorted(marked):
            point_pos.append(pos)
            point_gateway.append(1 if pos in gateways else 0)
            point_sensor_idx.extend(marked[pos])
            point_sensor_offset.append(len(point_sensor_idx))
        point_offset.append(len(point_pos))

    msg_offset = [0]
    msg_times: list[np.ndarray] = []
    for sensor in sensors:
        times = generation_times(
            sensor.generation_period, sensor.generation_phase, horizon
        )
        msg_times.append(times)
        msg_offset.append(msg_offset[-1] + len(times))
    msg_t_gen = np.concatenate(msg_times) if msg_times else np.empty(0)

    visits = [v for per_sensor in plan.visits_by_sensor for v in per_sensor]
    gateway_sets = [set(r.gateway_positions) for r in scenario.routes]
    visit_pos_gateway = []
    for v in visits:
        if v.direct_to_gateway:
            visit_pos_gateway.append(0)
        else:
            r = bus_route[v.bus_index]
            visit_pos_gateway.append(1 if v.board_position in gateway_sets[r] else 0)

    return CompiledPlan(
        horizon=horizon,
        circumference=circumference,
        bus_route=bus_route,
        bus_p0=bus_p0,
        bus_v_kms=bus_v_kms,
        bus_loop_s=np.asarray(bus_loop_s),
        point_offset=np.array(point_offset, dtype=np.int32),
        point_pos=np.array(point_pos, dtype=np.float64),
        point_gateway=np.array(point_gateway, dtype=np.uint8),
        point_sensor_offset=np.array(point_sensor_offset, dtype=np.int32),
        point_sensor_idx=np.array(point_sensor_idx, dtype=np.int32),
        msg_offset=np.array(msg_offset, dtype=np.int64),
        msg_t_gen=msg_t_gen,
        visit_sensor=np.array(
            [n_onroute + v.sensor_index for v in visits], dtype=np.int32
        ),
        visit_time=np.array([v.time for v in visits], dtype=np.float64),
        visit_ready=np.array([v.ready_time for v in visits], dtype=np.float64),
        visit_direct=np.array(
            [1 if v.direct_to_gateway else 0 for v in visits], dtype=np.uint8
        ),
        visit_bus=np.array([v.bus_index for v in visits], dtype=np.int32),
        visit_pos=np.array(
            [0.0 if v.direct_to_gateway else v.board_position for v in visits],
            dtype=np.float64,
        ),
        visit_pos_gateway=np.array(visit_pos_gateway, dtype=np.uint8),
    )


@dataclass
class Message:
    """One sensor datum with its full lifecycle."""

    message_id: str
    sensor_id: str
    kind: str
    t_generated: float
    t_pedestrian_pickup: float | None = None
    t_bus_board: float | None = None
    t_delivered: float | None = None
    delivery_path: str | None = None


@dataclass
class SimulationResult:
    """Lifecycle stamps for every generated message, plus run metadata.

    Stamps are column arrays aligned with `msg_t_gen`; absent stages are
    NaN.  `messages()` materializes the record view on demand.
    """

    seed: int
    horizon: float
    summary: dict
    sensor_ids: list[str]
    sensor_kinds: list[str]
    msg_offset: np.ndarray
    msg_t_gen: np.ndarray
    t_ped: np.ndarray
    t_board: np.ndarray
    t_deliv: np.ndarray
    path: np.ndarray
    events_processed: int
    core_used: str

    @property
    def generated(self) -> int:
        return len(self.msg_t_gen)

    @property
    def delivered(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.t_deliv)))

    @property
    def residual(self) -> int:
        return self.generated - self.delivered

    def residual_locations(self) -> dict[str, int]:
        """Where undelivered messages sit at the horizon."""
        undelivered = np.isnan(self.t_deliv)
        on_bus = undelivered & ~np.isnan(self.t_board)
        with_ped = undelivered & np.isnan(self.t_board) & ~np.isnan(self.t_ped)
        at_sensor = undelivered & np.isnan(self.t_board) & np.isnan(self.t_ped)
        return {
            "at_sensor": int(np.count_nonzero(at_sensor)),
            "with_pedestrian": int(np.count_nonzero(with_ped)),
            "on_bus": int(np.count_nonzero(on_bus)),
        }

    def sensor_slice(self, sensor_index: int) -> slice:
        return slice(
            int(self.msg_offset[sensor_index]), int(self.msg_offset[sensor_index + 1])
        )

    def messages(self) -> list[Message]:
        out: list[Message] = []
        for s, sensor_id in enumerate(self.sensor_ids):
            kind = self.sensor_kinds[s]
            sl = self.sensor_slice(s)
            for k, i in enumerate(range(sl.start, sl.stop)):
                out.append(
                    Message(
                        message_id=f"{sensor_id}#{k}",
                        sensor_id=sensor_id,
                        kind=kind,
                        t_generated=float(self.msg_t_gen[i]),
                        t_pedestrian_pickup=_opt(self.t_ped[i]),
                        t_bus_board=_opt(self.t_board[i]),
                        t_delivered=_opt(self.t_deliv[i]),
                        delivery_path=PATH_NAMES.get(int(self.path[i])),
                    )
                )
        return out

    def check_invariants(self) -> None:
        """Conservation and stamp monotonicity; raises on violation."""
        locations = self.residual_locations()
        if self.delivered + sum(locations.values()) != self.generated:
            raise InvariantViolation("message conservation violated")
        for earlier, later in (
            (self.msg_t_gen, self.t_ped),
            (self.msg_t_gen, self.t_board),
            (self.t_ped, self.t_board),
            (self.t_board, self.t_deliv),
            (self.msg_t_gen, self.t_deliv),
        ):
            both = ~np.isnan(earlier) & ~np.isnan(later)
            if np.any(earlier[both] > later[both]):
                raise InvariantViolation("lifecycle timestamps out of order")
        onroute = self.path == _core_py.PATH_ONROUTE
        if np.any(~np.isnan(self.t_ped[onroute])):
            raise InvariantViolation("on-route message with pedestrian pickup")


def _opt(value: float) -> float | None:
    return None if math.isnan(value) else float(value)


def run(
    scenario: Scenario,
    horizon: float | None = None,
    plan: PedestrianPlan | None = None,
    core: str | None = None,
) -> SimulationResult:
    """Simulate a scenario up to ``horizon`` seconds (config duration when
    omitted).  Deterministic given (scenario, horizon): the pedestrian
    plan is derived from the scenario seed unless supplied explicitly.
    """
    if horizon is None:
        horizon = scenario.config.duration_s
    if horizon < 0:
        raise ConfigurationError(f"horizon must be nonnegative, got {horizon}")
    scenario.validate()
    if plan is None:
        plan = sample_pedestrian_plan(scenario, horizon)
    elif plan.horizon < horizon:
        raise ConfigurationError(
            f"pedestrian plan horizon {plan.horizon} shorter than run horizon {horizon}"
        )

    compiled = compile_plan(scenario, horizon, plan)
    chosen = core or active_core()
    if chosen == "compiled":
        if _core_c is None:
            raise ConfigurationError("compiled core requested but not installed")
        events = _core_c.run_core(compiled)
    elif chosen == "python":
        events = _core_py.run_core(compiled)
    else:
        raise ConfigurationError(f"unknown core {chosen!r}")

    sensors = list(scenario.onroute_sensors) + list(scenario.offroute_sensors)
    result = SimulationResult(
        seed=scenario.seed,
        horizon=horizon,
        summary=scenario.summary(),
        sensor_ids=[s.sensor_id for s in sensors],
        sensor_kinds=[s.kind for s in sensors],
        msg_offset=compiled.msg_offset,
        msg_t_gen=compiled.msg_t_gen,
        t_ped=compiled.t_ped,
        t_board=compiled.t_board,
        t_deliv=compiled.t_deliv,
        path=compiled.path,
        events_processed=events,
        core_used=chosen,
    )
    result.check_invariants()
    return result


__all__ = [
    "CompiledPlan",
    "Message",
    "SimulationResult",
    "active_core",
    "available_cores",
    "compile_plan",
    "generation_times",
    "run",
    "ON_ROUTE",
    "OFF_ROUTE",
]
