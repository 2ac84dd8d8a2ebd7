"""Event engine: contact semantics, conservation, determinism, and the
analytic cross-check."""

import math

import numpy as np
import pytest

from citymule import engine
from citymule.errors import ConfigurationError
from citymule.geometry import Bus, RouteCircle
from citymule.latency import onroute_delay, onroute_delay_bound
from citymule.scenario import (
    PedestrianVisit,
    ScenarioConfig,
    build_scenario,
    sample_pedestrian_plan,
)
from conftest import offroute_scenario, plan_with_visits, single_route_scenario

HOUR = 3600.0


class TestSingleRoute:
    def test_textbook_delivery(self):
        # bus from 0 at 20 km/h, sensor at 5, gateway at 10: delivered 0.5 h
        scenario = single_route_scenario(period=100 * HOUR, phase=0.0)
        result = engine.run(scenario, 2 * HOUR)
        assert result.generated == 1
        assert result.delivered == 1
        assert result.t_board[0] == pytest.approx(0.25 * HOUR, abs=1e-6)
        assert result.t_deliv[0] == pytest.approx(0.5 * HOUR, abs=1e-6)

    def test_matches_analytic_per_message(self):
        scenario = single_route_scenario(period=1700.0, phase=321.0)
        result = engine.run(scenario, 12 * HOUR)
        route, bus = scenario.routes[0], scenario.buses[0]
        delivered = ~np.isnan(result.t_deliv)
        assert delivered.sum() > 10
        for i in np.nonzero(delivered)[0]:
            expected = onroute_delay(route, bus, 5.0, float(result.msg_t_gen[i])).total
            got = float(result.t_deliv[i] - result.msg_t_gen[i])
            assert abs(got - expected) < 1e-6

    def test_zero_horizon(self):
        result = engine.run(single_route_scenario(), 0.0)
        assert result.generated == 0
        assert result.delivered == 0

    def test_negative_horizon_rejected(self):
        with pytest.raises(ConfigurationError):
            engine.run(single_route_scenario(), -1.0)

    def test_bus_to_gateway_ride_time(self):
        scenario = single_route_scenario(sensor_at=5.0, gateway_at=10.0, period=9000.0)
        result = engine.run(scenario, 6 * HOUR)
        rides = result.t_deliv - result.t_board
        rides = rides[~np.isnan(rides)]
        assert np.allclose(rides, 0.25 * HOUR, atol=1e-6)

    def test_colocated_sensor_and_gateway_delivers_instantly(self):
        scenario = single_route_scenario(sensor_at=10.0, gateway_at=10.0, period=2000.0)
        result = engine.run(scenario, 6 * HOUR)
        delivered = ~np.isnan(result.t_deliv)
        assert delivered.any()
        assert np.all(result.t_deliv[delivered] == result.t_board[delivered])

    def test_route_without_gateway_rejected_before_execution(self):
        scenario = single_route_scenario()
        bad = RouteCircle("r0", 15.0, stops=(1.0,), onroute_sensor_positions=(5.0,))
        scenario.routes[0] = bad
        with pytest.raises(Exception):
            engine.run(scenario, HOUR)


class TestBusSensorContact:
    def test_full_transfer_of_queued_messages(self):
        # messages at 100, 350, 600, 850 all board at the 900 s crossing
        scenario = single_route_scenario(period=250.0, phase=100.0)
        result = engine.run(scenario, 1000.0)
        boarded = result.t_board[~np.isnan(result.t_board)]
        assert len(boarded) == 4
        assert np.all(boarded == boarded[0])

    def test_empty_sensor_is_noop(self):
        scenario = single_route_scenario(period=100 * HOUR, phase=99 * HOUR)
        result = engine.run(scenario, HOUR)
        assert result.generated == 0
        assert result.events_processed > 0

    def test_two_bus_split(self):
        # buses phase-offset by C/2: first takes the backlog, second takes
        # only what was generated in between
        scenario = single_route_scenario(
            period=600.0, phase=0.0, extra_buses=(7.5,)
        )
        result = engine.run(scenario, 2260.0)
        # bus1 (from 7.5) reaches sensor 5 at (5-7.5) mod 15 = 12.5 km -> 2250 s
        # bus0 (from 0) reaches sensor at 900 s
        t_first, t_second = 900.0, 2250.0
        boards = result.t_board
        gen = result.msg_t_gen
        first = [i for i in range(len(gen)) if gen[i] <= t_first]
        second = [i for i in range(len(gen)) if t_first < gen[i] <= t_second]
        for i in first:
            assert boards[i] == pytest.approx(t_first, abs=1e-6)
        for i in second:
            assert boards[i] == pytest.approx(t_second, abs=1e-6)
        assert len(first) == 2 and len(second) == 2

    def test_message_generated_at_contact_instant_boards(self):
        # generation exactly at the crossing time is included in the pickup
        scenario = single_route_scenario(period=5000.0, phase=900.0)
        result = engine.run(scenario, 1200.0)
        assert result.generated == 1
        assert result.t_board[0] == pytest.approx(900.0, abs=1e-9)


class TestPedestrians:
    def test_forced_direct_gateway_branch(self):
        scenario = offroute_scenario(period=600.0, phase=0.0)
        visit = PedestrianVisit(
            sensor_index=0, time=1000.0, ready_time=1000.0 + HOUR, direct_to_gateway=True
        )
        result = engine.run(scenario, 6 * HOUR, plan=plan_with_visits(6 * HOUR, visit))
        picked = ~np.isnan(result.t_ped)
        assert picked.sum() == 2  # messages at 0 and 600
        assert np.all(result.t_ped[picked] == 1000.0)
        assert np.all(result.t_deliv[picked] == 1000.0 + HOUR)
        assert np.all(np.isnan(result.t_board[picked]))
        assert all(
            m.delivery_path == "sensor-pedestrian-gateway"
            for m in result.messages()
            if m.t_pedestrian_pickup is not None
        )

    def test_bus_branch_boards_at_next_crossing(self):
        scenario = offroute_scenario(period=600.0, phase=0.0, stop_at=4.0)
        ready = 1000.0
        visit = PedestrianVisit(
            sensor_index=0,
            time=500.0,
            ready_time=ready,
            direct_to_gateway=False,
            bus_index=0,
            board_position=4.0,
        )
        result = engine.run(scenario, 6 * HOUR, plan=plan_with_visits(6 * HOUR, visit))
        # bus from 0 at 20 km/h passes 4 km at 720 s, then every 2700 s: 3420 s
        picked = ~np.isnan(result.t_ped)
        assert picked.sum() == 1
        assert result.t_board[0] == pytest.approx(3420.0, abs=1e-6)
        # carried 4 -> 10 km: 6 km at 20 km/h = 1080 s
        assert result.t_deliv[0] == pytest.approx(4500.0, abs=1e-6)
        assert result.messages()[0].delivery_path == "sensor-pedestrian-bus-gateway"

    def test_empty_sensor_pedestrian_carries_nothing(self):
        scenario = offroute_scenario(period=600.0, phase=550.0)
        visit = PedestrianVisit(
            sensor_index=0, time=100.0, ready_time=200.0, direct_to_gateway=True
        )
        result = engine.run(scenario, 1000.0, plan=plan_with_visits(1000.0, visit))
        assert np.all(np.isnan(result.t_ped))

    def test_boarding_at_gateway_stop_delivers_at_boarding(self):
        scenario = offroute_scenario(period=600.0, phase=0.0, gateway_at=10.0)
        visit = PedestrianVisit(
            sensor_index=0,
            time=100.0,
            ready_time=200.0,
            direct_to_gateway=False,
            bus_index=0,
            board_position=10.0,
        )
        result = engine.run(scenario, 6 * HOUR, plan=plan_with_visits(6 * HOUR, visit))
        picked = ~np.isnan(result.t_ped)
        assert picked.sum() == 1
        assert result.t_deliv[0] == result.t_board[0]

    def test_undelivered_batch_counts_in_pedestrian_residual(self):
        scenario = offroute_scenario(period=600.0, phase=0.0)
        visit = PedestrianVisit(
            sensor_index=0, time=1000.0, ready_time=100 * HOUR, direct_to_gateway=True
        )
        result = engine.run(scenario, 2000.0, plan=plan_with_visits(2000.0, visit))
        assert result.residual_locations()["with_pedestrian"] == 2


class TestRunProperties:
    @pytest.mark.parametrize("seed", range(5))
    def test_conservation_and_monotonicity(self, seed):
        config = ScenarioConfig(
            seed=seed, num_routes=3, num_offroute_sensors=8, duration_s=8 * HOUR
        )
        scenario = build_scenario(config)
        result = engine.run(scenario)
        locations = result.residual_locations()
        assert result.generated == result.delivered + sum(locations.values())
        result.check_invariants()

    def test_identical_runs_are_identical(self):
        config = ScenarioConfig(seed=4, num_routes=3, num_offroute_sensors=6)
        a = engine.run(build_scenario(config), 12 * HOUR)
        b = engine.run(build_scenario(config), 12 * HOUR)
        assert a.msg_t_gen.tobytes() == b.msg_t_gen.tobytes()
        assert a.t_deliv.tobytes() == b.t_deliv.tobytes()
        assert a.events_processed == b.events_processed

    def test_delay_bound_strict_for_delivered_onroute(self):
        for seed in range(5):
            config = ScenarioConfig(
                seed=seed, num_routes=4, num_offroute_sensors=0, duration_s=12 * HOUR
            )
            scenario = build_scenario(config)
            result = engine.run(scenario)
            routes = {r.route_id: r for r in scenario.routes}
            speeds = {b.route_id: b.speed_kms() for b in scenario.buses}
            for s, sensor in enumerate(scenario.onroute_sensors):
                route = routes[sensor.route_id]
                bound = 2.0 * route.circumference / speeds[sensor.route_id]
                sl = result.sensor_slice(s)
                delays = result.t_deliv[sl] - result.msg_t_gen[sl]
                delays = delays[~np.isnan(delays)]
                assert np.all(delays < bound)

    def test_message_records_roundtrip(self):
        scenario = single_route_scenario(period=2000.0)
        result = engine.run(scenario, 4 * HOUR)
        messages = result.messages()
        assert len(messages) == result.generated
        assert messages[0].message_id == "r0-sensor0#0"
        assert all(m.kind == "on-route" for m in messages)
        assert all(m.t_pedestrian_pickup is None for m in messages)


class TestCoreParity:
    @pytest.mark.skipif(
        "compiled" not in engine.available_cores(), reason="compiled core not built"
    )
    @pytest.mark.parametrize("seed", range(4))
    def test_bitwise_identical_cores(self, seed):
        config = ScenarioConfig(
            seed=seed, num_routes=3, num_offroute_sensors=10, duration_s=12 * HOUR
        )
        scenario = build_scenario(config)
        plan = sample_pedestrian_plan(scenario, 12 * HOUR)
        a = engine.run(scenario, 12 * HOUR, plan=plan, core="python")
        b = engine.run(scenario, 12 * HOUR, plan=plan, core="compiled")
        for name in ("t_ped", "t_board", "t_deliv", "path"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes(), name
        assert a.events_processed == b.events_processed
