"""Time-stepped reference simulator.

A deliberately naive cross-check for the event engine: instead of solving
for crossing times, it advances every bus in fixed steps (default 0.1 s)
and checks each step interval for traversal of a marked point.  Contacts
are stamped at the end of the step that contains them, so every timestamp
agrees with the exact engine to within one step.

Agreement guarantees assume generic scenarios: schedule instants (message
generation, pedestrian visits and ready times) aligned to the step grid
with at least one full step between distinct instants, and no two buses
crossing the same point within one step.  Scheduled-instant comparisons
use a half-step guard band so that grid values perturbed by float
round-off still land in the intended step.

This module exists to validate the engine; it is not a production path.
"""

from __future__ import annotations

import math
from heapq import heappop, heappush

import numpy as np

from ._core_py import PATH_DIRECT, PATH_ONROUTE, PATH_VIA_BUS
from .engine import SimulationResult, compile_plan
from .errors import ConfigurationError
from .scenario import PedestrianPlan, Scenario, sample_pedestrian_plan

_KIND_CONTACT = 0
_KIND_VISIT = 1
_KIND_DIRECT = 2
_KIND_BOARD = 3


def _wrap_array(x: np.ndarray, circumference: float) -> np.ndarray:
    r = np.fmod(x, circumference)
    r = np.where(r < 0.0, r + circumference, r)
    return np.where((circumference - r < 1e-9) | (r >= circumference), 0.0, r)


def run_stepped(
    scenario: Scenario,
    horizon: float,
    step: float = 0.1,
    plan: PedestrianPlan | None = None,
) -> SimulationResult:
    """Simulate by brute-force time stepping; horizon must be a whole
    number of steps."""
    if horizon < 0:
        raise ConfigurationError(f"horizon must be nonnegative, got {horizon}")
    scenario.validate()
    if plan is None:
        plan = sample_pedestrian_plan(scenario, horizon)
    cp = compile_plan(scenario, horizon, plan)

    n_steps = int(round(horizon / step))
    if abs(n_steps * step - horizon) > 1e-9:
        raise ConfigurationError(
            f"horizon {horizon} is not a whole number of {step}s steps"
        )
    guard = 0.5 * step
    starts = step * np.arange(n_steps)

    n_buses = len(cp.bus_route)
    n_visits = len(cp.visit_time)

    # Step-start positions per bus, reused for contact detection and for
    # boarding-crossing searches.
    bus_positions: list[np.ndarray] = []
    for b in range(n_buses):
        c = cp.circumference[cp.bus_route[b]]
        bus_positions.append(_wrap_array(cp.bus_p0[b] + cp.bus_v_kms[b] * starts, c))

    # Event key: (time, bus, distance-from-step-start, counter).  Distance
    # orders same-bus same-step events in traversal order, matching the
    # exact engine's time order.
    heap: list[tuple] = []
    counter = 0
    for b in range(n_buses):
        r = cp.bus_route[b]
        c = cp.circumference[r]
        reach = cp.bus_v_kms[b] * step
        for p in range(cp.point_offset[r], cp.point_offset[r + 1]):
            dist = _wrap_array(cp.point_pos[p] - bus_positions[b], c)
            if n_steps > 0 and dist[0] == 0.0:
                heappush(heap, (0.0, b, 0.0, counter, _KIND_CONTACT, p, 0.0))
                counter += 1
            hits = np.nonzero((dist > 0.0) & (dist <= reach))[0]
            for j in hits:
                heappush(
                    heap,
                    (
                        (j + 1) * step,
                        b,
                        float(dist[j]),
                        counter,
                        _KIND_CONTACT,
                        p,
                        float(starts[j]),
                    ),
                )
                counter += 1
    for vi in range(n_visits):
        heappush(
            heap, (float(cp.visit_time[vi]), -1, 0.0, counter, _KIND_VISIT, vi, 0.0)
        )
        counter += 1

    n_sensors = len(cp.msg_offset) - 1
    sensor_ptr = [int(cp.msg_offset[s]) for s in range(n_sensors)]
    bus_buffers: list[list[tuple[int, int]]] = [[] for _ in range(n_buses)]
    batch = [(-1, -1)] * n_visits
    events = 0

    def take_buffer(s: int, limit: float) -> tuple[int, int]:
        lo = sensor_ptr[s]
        end = int(cp.msg_offset[s + 1])
        hi = lo
        while hi < end and cp.msg_t_gen[hi] <= limit:
            hi += 1
        sensor_ptr[s] = hi
        return lo, hi

    while heap:
        t, bus, _dist, _n, kind, a, limit = heappop(heap)
        if kind == _KIND_CONTACT:
            point = a
            for si in range(
                cp.point_sensor_offset[point], cp.point_sensor_offset[point + 1]
            ):
                s = cp.point_sensor_idx[si]
                lo, hi = take_buffer(int(s), limit + guard)
                if hi > lo:
                    cp.t_board[lo:hi] = t
                    cp.path[lo:hi] = PATH_ONROUTE
                    bus_buffers[bus].append((lo, hi))
            if cp.point_gateway[point]:
                for lo, hi in bus_buffers[bus]:
                    cp.t_deliv[lo:hi] = t
                bus_buffers[bus].clear()
            events += 1

        elif kind == _KIND_VISIT:
            vi = a
            if t >= horizon:
                continue
            events += 1
            lo, hi = take_buffer(int(cp.visit_sensor[vi]), t)
            if hi > lo:
                cp.t_ped[lo:hi] = t
                batch[vi] = (lo, hi)
                if cp.visit_direct[vi]:
                    cp.path[lo:hi] = PATH_DIRECT
                    heappush(
                        heap,
                        (
                            float(cp.visit_ready[vi]),
                            -1,
                            0.0,
                            counter,
                            _KIND_DIRECT,
                            vi,
                            0.0,
                        ),
                    )
                    counter += 1
                else:
                    cp.path[lo:hi] = PATH_VIA_BUS
                    board = _first_crossing(cp, bus_positions, starts, step, guard, vi)
                    if board is not None:
                        heappush(heap, board + (counter, _KIND_BOARD, vi, 0.0))
                        counter += 1

        elif kind == _KIND_DIRECT:
            vi = a
            if t >= horizon:
                continue
            events += 1
            lo, hi = batch[vi]
            cp.t_deliv[lo:hi] = t

        else:  # _KIND_BOARD
            vi = a
            events += 1
            lo, hi = batch[vi]
            cp.t_board[lo:hi] = t
            if cp.visit_pos_gateway[vi]:
                cp.t_deliv[lo:hi] = t
            else:
                bus_buffers[int(cp.visit_bus[vi])].append((lo, hi))

    sensors = list(scenario.onroute_sensors) + list(scenario.offroute_sensors)
    return SimulationResult(
        seed=scenario.seed,
        horizon=horizon,
        summary=scenario.summary(),
        sensor_ids=[s.sensor_id for s in sensors],
        sensor_kinds=[s.kind for s in sensors],
        msg_offset=cp.msg_offset,
        msg_t_gen=cp.msg_t_gen,
        t_ped=cp.t_ped,
        t_board=cp.t_board,
        t_deliv=cp.t_deliv,
        path=cp.path,
        events_processed=events,
        core_used="stepped",
    )


def _first_crossing(cp, bus_positions, starts, step, guard, vi):
    """First stepped crossing of the visit's boarding stop at or after the
    ready time; (time, bus, distance) or None when past the horizon."""
    bus = int(cp.visit_bus[vi])
    c = cp.circumference[cp.bus_route[bus]]
    reach = cp.bus_v_kms[bus] * step
    ready = cp.visit_ready[vi]
    j0 = max(0, int(math.ceil((ready - guard) / step)))
    if j0 >= len(starts):
        return None
    dist = _wrap_array(cp.visit_pos[vi] - bus_positions[bus][j0:], c)
    hits = np.nonzero((dist > 0.0) & (dist <= reach))[0]
    if len(hits) == 0:
        return None
    j = j0 + int(hits[0])
    return ((j + 1) * step, bus, float(dist[hits[0]]))
