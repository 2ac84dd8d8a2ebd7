"""Seeded scenario construction: determinism, ranges, and config I/O."""

import json
import math

import pytest

from citymule.errors import ConfigurationError
from citymule.scenario import (
    RouteProfile,
    Scenario,
    ScenarioConfig,
    apply_overrides,
    build_scenario,
    config_from_mapping,
    config_hash,
    from_route_profiles,
    load_config,
    sample_pedestrian_plan,
)

HOUR = 3600.0


def small_config(seed=0, **overrides) -> ScenarioConfig:
    params = dict(seed=seed, num_routes=4, num_offroute_sensors=6, duration_s=6 * HOUR)
    params.update(overrides)
    return ScenarioConfig(**params)


class TestBuildScenario:
    def test_same_seed_is_identical(self):
        a = build_scenario(small_config(seed=7))
        b = build_scenario(small_config(seed=7))
        assert a == b

    def test_different_seed_differs(self):
        a = build_scenario(small_config(seed=0))
        b = build_scenario(small_config(seed=1))
        assert a != b
        assert a.routes[0].circumference != b.routes[0].circumference

    def test_default_counts(self):
        scenario = build_scenario(ScenarioConfig(seed=3))
        assert len(scenario.routes) == 32
        assert len(scenario.offroute_sensors) == 100
        for route in scenario.routes:
            assert 1 <= len(route.gateway_positions) <= 2

    def test_degenerate_bus_range(self):
        scenario = build_scenario(small_config(num_routes=1, buses_per_route=(1, 1)))
        assert len(scenario.buses) == 1

    def test_sampled_values_honor_ranges(self):
        for seed in range(10):
            scenario = build_scenario(small_config(seed=seed))
            for route in scenario.routes:
                assert route.circumference > 0
                assert len(route.stops) >= 2
                stops = set(route.stops)
                assert all(g in stops for g in route.gateway_positions)
            for bus in scenario.buses:
                assert 17.47 <= bus.speed <= 21.47
            for sensor in scenario.onroute_sensors + scenario.offroute_sensors:
                assert 600.0 <= sensor.generation_period <= 7200.0
                assert 0.0 <= sensor.generation_phase < sensor.generation_period
            counts = {}
            for sensor in scenario.onroute_sensors:
                counts[sensor.route_id] = counts.get(sensor.route_id, 0) + 1
            assert all(2 <= n <= 8 for n in counts.values())

    def test_even_bus_phasing(self):
        scenario = build_scenario(small_config(buses_per_route=(2, 2)))
        by_route = {}
        for bus in scenario.buses:
            by_route.setdefault(bus.route_id, []).append(bus)
        for route in scenario.routes:
            buses = by_route[route.route_id]
            assert buses[0].initial_position == 0.0
            assert buses[1].initial_position == pytest.approx(route.circumference / 2)
            assert buses[0].speed == buses[1].speed

    def test_validation_errors_name_fields(self):
        with pytest.raises(ConfigurationError, match="gateways_per_route"):
            ScenarioConfig(gateways_per_route=(2, 1))
        with pytest.raises(ConfigurationError, match="num_routes"):
            ScenarioConfig(num_routes=0)
        with pytest.raises(ConfigurationError, match="p_pedestrian_gateway"):
            ScenarioConfig(p_pedestrian_gateway=1.5)
        with pytest.raises(ConfigurationError, match="bus_speed_range_kmh"):
            ScenarioConfig(bus_speed_range_kmh=(0.0, 10.0))

    def test_spread_interpretation_flag(self):
        std = ScenarioConfig(spread_is_variance=False)
        var = ScenarioConfig(spread_is_variance=True)
        assert std.circumference_std_km == 7.0
        assert var.circumference_std_km == pytest.approx(math.sqrt(7.0))
        assert std.pedestrian_arrival_std_s == 1800.0
        assert var.pedestrian_arrival_std_s == pytest.approx(math.sqrt(1800.0))


class TestPedestrianPlan:
    def test_deterministic(self):
        scenario = build_scenario(small_config(seed=5))
        a = sample_pedestrian_plan(scenario, 6 * HOUR)
        b = sample_pedestrian_plan(scenario, 6 * HOUR)
        assert a == b

    def test_visits_within_horizon_and_ordered(self):
        scenario = build_scenario(small_config(seed=5))
        plan = sample_pedestrian_plan(scenario, 12 * HOUR)
        assert len(plan.visits_by_sensor) == len(scenario.offroute_sensors)
        n_buses = len(scenario.buses)
        for visits in plan.visits_by_sensor:
            times = [v.time for v in visits]
            assert times == sorted(times)
            for v in visits:
                assert 0.0 <= v.time < 12 * HOUR
                assert v.ready_time > v.time
                if not v.direct_to_gateway:
                    assert 0 <= v.bus_index < n_buses

    def test_zero_horizon_has_no_visits(self):
        scenario = build_scenario(small_config(seed=5))
        plan = sample_pedestrian_plan(scenario, 0.0)
        assert all(not v for v in plan.visits_by_sensor)

    def test_board_positions_are_stops_of_the_bus_route(self):
        scenario = build_scenario(small_config(seed=5))
        plan = sample_pedestrian_plan(scenario, 24 * HOUR)
        routes = {r.route_id: r for r in scenario.routes}
        for visits in plan.visits_by_sensor:
            for v in visits:
                if not v.direct_to_gateway:
                    bus = scenario.buses[v.bus_index]
                    assert v.board_position in routes[bus.route_id].stops


class TestFromProfiles:
    def make_profiles(self):
        return [
            RouteProfile("RA", "A", 10.0, 5, 1, source="fixture"),
            RouteProfile("RB", "B", 20.0, 9, 2, source="fixture"),
        ]

    def test_passthrough_geometry(self):
        scenario = from_route_profiles(self.make_profiles(), small_config())
        assert [r.circumference for r in scenario.routes] == [10.0, 20.0]
        assert [len(r.stops) for r in scenario.routes] == [5, 9]
        by_route = {}
        for bus in scenario.buses:
            by_route[bus.route_id] = by_route.get(bus.route_id, 0) + 1
        assert by_route == {"RA": 1, "RB": 2}

    def test_route_count_follows_profiles(self):
        profiles = [
            RouteProfile(f"R{i}", f"route {i}", 12.0 + i, 40, 1) for i in range(32)
        ]
        scenario = from_route_profiles(profiles, small_config())
        assert len(scenario.routes) == 32

    def test_empty_profiles_rejected(self):
        with pytest.raises(ConfigurationError):
            from_route_profiles([], small_config())

    def test_zero_distance_profile_rejected_with_id(self):
        with pytest.raises(ConfigurationError, match="RBAD"):
            RouteProfile("RBAD", "bad", 0.0, 5, 1)


class TestConfigIO:
    def test_round_trip_with_units(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(
            json.dumps(
                {
                    "seed": 9,
                    "duration": "6h",
                    "num_routes": 3,
                    "bus_speed_range": ["18km/h", "20km/h"],
                    "generation_period_range": ["10min", "2h"],
                    "circumference_mean": "12km",
                    "pedestrian_arrival_mean": "2h",
                    "pedestrian_to_bus_median": "48h",
                    "p_pedestrian_gateway": 0.05,
                }
            )
        )
        config = load_config(path)
        assert config.seed == 9
        assert config.duration_s == 6 * HOUR
        assert config.num_routes == 3
        assert config.bus_speed_range_kmh == (18.0, 20.0)
        assert config.generation_period_range_s == (600.0, 7200.0)
        assert config.circumference_mean_km == 12.0
        assert config.p_pedestrian_gateway == 0.05

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError, match="num_route_typo"):
            config_from_mapping({"num_route_typo": 3})

    def test_bare_number_where_unit_needed(self):
        with pytest.raises(ConfigurationError, match="duration"):
            config_from_mapping({"duration": 48})

    def test_overrides(self):
        config = apply_overrides(
            ScenarioConfig(),
            {"num_routes": "4", "gateways_per_route": "2", "duration": "6h"},
        )
        assert config.num_routes == 4
        assert config.gateways_per_route == (2, 2)
        assert config.duration_s == 6 * HOUR
        config = apply_overrides(config, {"gateways_per_route": "1:3"})
        assert config.gateways_per_route == (1, 3)

    def test_override_unknown_key_lists_valid(self):
        with pytest.raises(ConfigurationError, match="known keys"):
            apply_overrides(ScenarioConfig(), {"nope": "1"})

    def test_config_hash_stable_across_seeds(self):
        a = config_hash(ScenarioConfig(seed=0))
        b = config_hash(ScenarioConfig(seed=99))
        c = config_hash(ScenarioConfig(seed=0, num_routes=31))
        assert a == b
        assert a != c
