# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event-loop core.

Semantically identical twin of `_core_py.run_core`: the same float
operations in the same order, so results are bit-for-bit equal to the
pure-Python fallback.  Keep both implementations in lockstep.
"""

from libc.math cimport fmod
from libc.stdlib cimport free, malloc, realloc

import numpy as np

cdef enum:
    KIND_BUS_POINT = 0
    KIND_VISIT = 1
    KIND_DIRECT = 2
    KIND_BOARD = 3

cdef enum:
    PATH_ONROUTE = 0
    PATH_VIA_BUS = 1
    PATH_DIRECT = 2

cdef double _SNAP = 1e-9


cdef inline double _wrap(double x, double c) noexcept nogil:
    cdef double r = fmod(x, c)
    if r < 0.0:
        r += c
    if c - r < _SNAP or r >= c:
        r = 0.0
    return r


cdef struct Event:
    double t
    long long seq
    int kind
    int a
    int b


cdef struct Heap:
    Event* items
    Py_ssize_t size
    Py_ssize_t cap


cdef inline bint _before(Event* x, Event* y) noexcept nogil:
    if x.t != y.t:
        return x.t < y.t
    return x.seq < y.seq


cdef bint _heap_push(Heap* h, double t, long long seq, int kind, int a, int b) noexcept nogil:
    cdef Py_ssize_t i, parent
    cdef Event e
    cdef Event* grown
    if h.size == h.cap:
        grown = <Event*> realloc(h.items, 2 * h.cap * sizeof(Event))
        if grown == NULL:
            return False
        h.items = grown
        h.cap = 2 * h.cap
    e.t = t
    e.seq = seq
    e.kind = kind
    e.a = a
    e.b = b
    i = h.size
    h.size += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _before(&e, &h.items[parent]):
            h.items[i] = h.items[parent]
            i = parent
        else:
            break
    h.items[i] = e
    return True


cdef Event _heap_pop(Heap* h) noexcept nogil:
    cdef Event top = h.items[0]
    cdef Event last
    cdef Py_ssize_t i = 0, child
    h.size -= 1
    last = h.items[h.size]
    while True:
        child = 2 * i + 1
        if child >= h.size:
            break
        if child + 1 < h.size and _before(&h.items[child + 1], &h.items[child]):
            child += 1
        if _before(&h.items[child], &last):
            h.items[i] = h.items[child]
            i = child
        else:
            break
    h.items[i] = last
    return top


cdef struct RangeList:
    long long* lo
    long long* hi
    Py_ssize_t size
    Py_ssize_t cap


cdef bint _ranges_push(RangeList* rl, long long lo, long long hi) noexcept nogil:
    cdef long long* grown_lo
    cdef long long* grown_hi
    if rl.size == rl.cap:
        grown_lo = <long long*> realloc(rl.lo, 2 * rl.cap * sizeof(long long))
        if grown_lo == NULL:
            return False
        rl.lo = grown_lo
        grown_hi = <long long*> realloc(rl.hi, 2 * rl.cap * sizeof(long long))
        if grown_hi == NULL:
            return False
        rl.hi = grown_hi
        rl.cap = 2 * rl.cap
    rl.lo[rl.size] = lo
    rl.hi[rl.size] = hi
    rl.size += 1
    return True


def run_core(plan) -> int:
    """Execute the event loop, stamping message lifecycles in place."""
    cdef double horizon = plan.horizon
    cdef double[::1] circumference = np.ascontiguousarray(plan.circumference)
    cdef int[::1] bus_route = plan.bus_route
    cdef double[::1] bus_p0 = np.ascontiguousarray(plan.bus_p0)
    cdef double[::1] bus_v = np.ascontiguousarray(plan.bus_v_kms)
    cdef double[::1] bus_loop = np.ascontiguousarray(plan.bus_loop_s)
    cdef int[::1] point_offset = plan.point_offset
    cdef double[::1] point_pos = plan.point_pos
    cdef unsigned char[::1] point_gateway = plan.point_gateway
    cdef int[::1] point_sensor_offset = plan.point_sensor_offset
    cdef int[::1] point_sensor_idx = plan.point_sensor_idx
    cdef long long[::1] msg_offset = plan.msg_offset
    cdef double[::1] msg_t_gen = plan.msg_t_gen
    cdef int[::1] visit_sensor = plan.visit_sensor
    cdef double[::1] visit_time = plan.visit_time
    cdef double[::1] visit_ready = plan.visit_ready
    cdef unsigned char[::1] visit_direct = plan.visit_direct
    cdef int[::1] visit_bus = plan.visit_bus
    cdef double[::1] visit_pos = plan.visit_pos
    cdef unsigned char[::1] visit_pos_gateway = plan.visit_pos_gateway
    cdef double[::1] t_ped = plan.t_ped
    cdef double[::1] t_board = plan.t_board
    cdef double[::1] t_deliv = plan.t_deliv
    cdef signed char[::1] path = plan.path

    cdef Py_ssize_t n_buses = bus_route.shape[0]
    cdef Py_ssize_t n_visits = visit_time.shape[0]
    cdef Py_ssize_t n_sensors = msg_offset.shape[0] - 1

    cdef Heap heap
    heap.cap = n_visits + point_offset[point_offset.shape[0] - 1] * max(n_buses, 1) + 64
    heap.size = 0
    heap.items = <Event*> malloc(heap.cap * sizeof(Event))
    if heap.items == NULL:
        raise MemoryError()

    cdef long long* sensor_ptr = <long long*> malloc(max(n_sensors, 1) * sizeof(long long))
    cdef long long* batch_lo = <long long*> malloc(max(n_visits, 1) * sizeof(long long))
    cdef long long* batch_hi = <long long*> malloc(max(n_visits, 1) * sizeof(long long))
    cdef RangeList* buffers = <RangeList*> malloc(max(n_buses, 1) * sizeof(RangeList))
    if sensor_ptr == NULL or batch_lo == NULL or batch_hi == NULL or buffers == NULL:
        free(heap.items); free(sensor_ptr); free(batch_lo); free(batch_hi); free(buffers)
        raise MemoryError()

    cdef Py_ssize_t i, b, p, si
    cdef long long seq = 0, lo, hi, end, events = 0
    cdef int r, s, bus, point, vi
    cdef double t, d, c, ready, pos
    cdef Event ev
    cdef bint ok = True

    for b in range(n_buses):
        buffers[b].size = 0
        buffers[b].cap = 8
        buffers[b].lo = <long long*> malloc(8 * sizeof(long long))
        buffers[b].hi = <long long*> malloc(8 * sizeof(long long))
        ok = ok and buffers[b].lo != NULL and buffers[b].hi != NULL
    for i in range(n_sensors):
        sensor_ptr[i] = msg_offset[i]
    for i in range(n_visits):
        batch_lo[i] = -1
        batch_hi[i] = -1

    try:
        if not ok:
            raise MemoryError()
        with nogil:
            for b in range(n_buses):
                r = bus_route[b]
                c = circumference[r]
                for p in range(point_offset[r], point_offset[r + 1]):
                    d = _wrap(point_pos[p] - bus_p0[b], c)
                    ok = _heap_push(&heap, d / bus_v[b], seq, KIND_BUS_POINT, <int> b, <int> p)
                    if not ok:
                        break
                    seq += 1
                if not ok:
                    break
            for i in range(n_visits):
                if not ok:
                    break
                ok = _heap_push(&heap, visit_time[i], seq, KIND_VISIT, <int> i, 0)
                seq += 1

            while ok and heap.size > 0:
                ev = _heap_pop(&heap)
                t = ev.t
                if t >= horizon:
                    break
                events += 1

                if ev.kind == KIND_BUS_POINT:
                    bus = ev.a
                    point = ev.b
                    for si in range(point_sensor_offset[point], point_sensor_offset[point + 1]):
                        s = point_sensor_idx[si]
                        lo = sensor_ptr[s]
                        end = msg_offset[s + 1]
                        hi = lo
                        while hi < end and msg_t_gen[hi] <= t:
                            hi += 1
                        if hi > lo:
                            for i in range(lo, hi):
                                t_board[i] = t
                                path[i] = PATH_ONROUTE
                            ok = _ranges_push(&buffers[bus], lo, hi)
                            if not ok:
                                break
                            sensor_ptr[s] = hi
                    if not ok:
                        break
                    if point_gateway[point]:
                        for i in range(buffers[bus].size):
                            lo = buffers[bus].lo[i]
                            hi = buffers[bus].hi[i]
                            for si in range(lo, hi):
                                t_deliv[si] = t
                        buffers[bus].size = 0
                    ok = _heap_push(&heap, t + bus_loop[bus], seq, KIND_BUS_POINT, bus, point)
                    seq += 1

                elif ev.kind == KIND_VISIT:
                    vi = ev.a
                    s = visit_sensor[vi]
                    lo = sensor_ptr[s]
                    end = msg_offset[s + 1]
                    hi = lo
                    while hi < end and msg_t_gen[hi] <= t:
                        hi += 1
                    if hi > lo:
                        sensor_ptr[s] = hi
                        batch_lo[vi] = lo
                        batch_hi[vi] = hi
                        if visit_direct[vi]:
                            for i in range(lo, hi):
                                t_ped[i] = t
                                path[i] = PATH_DIRECT
                            ok = _heap_push(&heap, visit_ready[vi], seq, KIND_DIRECT, vi, 0)
                            seq += 1
                        else:
                            for i in range(lo, hi):
                                t_ped[i] = t
                                path[i] = PATH_VIA_BUS
                            bus = visit_bus[vi]
                            c = circumference[bus_route[bus]]
                            ready = visit_ready[vi]
                            pos = _wrap(bus_p0[bus] + bus_v[bus] * ready, c)
                            d = _wrap(visit_pos[vi] - pos, c)
                            ok = _heap_push(&heap, ready + d / bus_v[bus], seq, KIND_BOARD, vi, 0)
                            seq += 1

                elif ev.kind == KIND_DIRECT:
                    vi = ev.a
                    for i in range(batch_lo[vi], batch_hi[vi]):
                        t_deliv[i] = t

                else:  # KIND_BOARD
                    vi = ev.a
                    lo = batch_lo[vi]
                    hi = batch_hi[vi]
                    if visit_pos_gateway[vi]:
                        for i in range(lo, hi):
                            t_board[i] = t
                            t_deliv[i] = t
                    else:
                        for i in range(lo, hi):
                            t_board[i] = t
                        ok = _ranges_push(&buffers[visit_bus[vi]], lo, hi)
        if not ok:
            raise MemoryError()
    finally:
        free(heap.items)
        free(sensor_ptr)
        free(batch_lo)
        free(batch_hi)
        for b in range(n_buses):
            free(buffers[b].lo)
            free(buffers[b].hi)
        free(buffers)

    return events
