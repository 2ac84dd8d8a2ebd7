"""Pure-Python event-loop core.

This is the fallback for the compiled extension `citymule._core` and the
reference for its semantics: both implementations execute the identical
sequence of float operations, so their outputs are bit-for-bit equal.
Any change here must be mirrored in `_core.pyx`.

Event kinds: 0 bus-at-point, 1 pedestrian visit, 2 direct gateway
handoff, 3 batch boards a bus.  Events execute strictly before the
horizon, in (time, sequence) order.
"""

from __future__ import annotations

import math
from heapq import heappop, heappush

KIND_BUS_POINT = 0
KIND_VISIT = 1
KIND_DIRECT = 2
KIND_BOARD = 3

PATH_ONROUTE = 0
PATH_VIA_BUS = 1
PATH_DIRECT = 2

_SNAP = 1e-9


def _wrap(x: float, circumference: float) -> float:
    r = math.fmod(x, circumference)
    if r < 0.0:
        r += circumference
    if circumference - r < _SNAP or r >= circumference:
        r = 0.0
    return r


def run_core(plan) -> int:
    """Execute the event loop, stamping message lifecycles in place."""
    horizon = plan.horizon
    circumference = plan.circumference
    bus_route = plan.bus_route
    bus_p0 = plan.bus_p0
    bus_v = plan.bus_v_kms
    bus_loop = plan.bus_loop_s
    point_offset = plan.point_offset
    point_pos = plan.point_pos
    point_gateway = plan.point_gateway
    point_sensor_offset = plan.point_sensor_offset
    point_sensor_idx = plan.point_sensor_idx
    msg_offset = plan.msg_offset
    msg_t_gen = plan.msg_t_gen
    visit_sensor = plan.visit_sensor
    visit_time = plan.visit_time
    visit_ready = plan.visit_ready
    visit_direct = plan.visit_direct
    visit_bus = plan.visit_bus
    visit_pos = plan.visit_pos
    visit_pos_gateway = plan.visit_pos_gateway
    t_ped = plan.t_ped
    t_board = plan.t_board
    t_deliv = plan.t_deliv
    path = plan.path

    n_buses = len(bus_route)
    n_visits = len(visit_time)
    n_sensors = len(msg_offset) - 1

    heap: list[tuple[float, int, int, int, int]] = []
    seq = 0
    for b in range(n_buses):
        r = bus_route[b]
        c = circumference[r]
        for p in range(point_offset[r], point_offset[r + 1]):
            d = _wrap(point_pos[p] - bus_p0[b], c)
            heappush(heap, (d / bus_v[b], seq, KIND_BUS_POINT, b, p))
            seq += 1
    for vi in range(n_visits):
        heappush(heap, (visit_time[vi], seq, KIND_VISIT, vi, 0))
        seq += 1

    bus_buffers: list[list[tuple[int, int]]] = [[] for _ in range(n_buses)]
    sensor_ptr = [int(msg_offset[s]) for s in range(n_sensors)]
    batch_lo = [-1] * n_visits
    batch_hi = [-1] * n_visits
    events = 0

    while heap:
        t, _, kind, a, b = heappop(heap)
        if t >= horizon:
            break
        events += 1

        if kind == KIND_BUS_POINT:
            bus = a
            point = b
            for si in range(point_sensor_offset[point], point_sensor_offset[point + 1]):
                s = point_sensor_idx[si]
                lo = sensor_ptr[s]
                end = msg_offset[s + 1]
                hi = lo
                while hi < end and msg_t_gen[hi] <= t:
                    hi += 1
                if hi > lo:
                    t_board[lo:hi] = t
                    path[lo:hi] = PATH_ONROUTE
                    bus_buffers[bus].append((lo, hi))
                    sensor_ptr[s] = hi
            if point_gateway[point]:
                for lo, hi in bus_buffers[bus]:
                    t_deliv[lo:hi] = t
                bus_buffers[bus].clear()
            heappush(heap, (t + bus_loop[bus], seq, KIND_BUS_POINT, bus, point))
            seq += 1

        elif kind == KIND_VISIT:
            vi = a
            s = visit_sensor[vi]
            lo = sensor_ptr[s]
            end = msg_offset[s + 1]
            hi = lo
            while hi < end and msg_t_gen[hi] <= t:
                hi += 1
            if hi > lo:
                t_ped[lo:hi] = t
                sensor_ptr[s] = hi
                batch_lo[vi] = lo
                batch_hi[vi] = hi
                if visit_direct[vi]:
                    path[lo:hi] = PATH_DIRECT
                    heappush(heap, (visit_ready[vi], seq, KIND_DIRECT, vi, 0))
                    seq += 1
                else:
                    path[lo:hi] = PATH_VIA_BUS
                    bus = visit_bus[vi]
                    c = circumference[bus_route[bus]]
                    ready = visit_ready[vi]
                    pos = _wrap(bus_p0[bus] + bus_v[bus] * ready, c)
                    d = _wrap(visit_pos[vi] - pos, c)
                    heappush(heap, (ready + d / bus_v[bus], seq, KIND_BOARD, vi, 0))
                    seq += 1

        elif kind == KIND_DIRECT:
            vi = a
            t_deliv[batch_lo[vi] : batch_hi[vi]] = t

        else:  # KIND_BOARD
            vi = a
            lo = batch_lo[vi]
            hi = batch_hi[vi]
            t_board[lo:hi] = t
            if visit_pos_gateway[vi]:
                t_deliv[lo:hi] = t
            else:
                bus_buffers[visit_bus[vi]].append((lo, hi))

    return events
