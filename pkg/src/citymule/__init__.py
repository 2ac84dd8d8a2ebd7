"""citymule: transit data-mule network simulator and latency estimator.

Models a city where public buses and participating pedestrians physically
carry sensor data to Internet gateways, providing closed-form latency
estimates, a seeded discrete-event simulator, scenario sampling from
configurable parameter tables or real GTFS feeds, and metrics exports.
"""

__version__ = "0.1.0"

from .engine import Message, SimulationResult, run
from .geometry import Bus, RouteCircle, arc_distance, bus_position_at, next_crossing_time
from .latency import (
    OffRouteDelay,
    OnRouteDelay,
    offroute_delay,
    offroute_delay_bound,
    onroute_delay,
    onroute_delay_bound,
)
from .scenario import (
    PedestrianPlan,
    RouteProfile,
    Scenario,
    ScenarioConfig,
    SensorSpec,
    build_scenario,
    from_route_profiles,
    sample_pedestrian_plan,
)

__all__ = [
    "Bus",
    "Message",
    "OffRouteDelay",
    "OnRouteDelay",
    "PedestrianPlan",
    "RouteCircle",
    "RouteProfile",
    "Scenario",
    "ScenarioConfig",
    "SensorSpec",
    "SimulationResult",
    "arc_distance",
    "build_scenario",
    "bus_position_at",
    "from_route_profiles",
    "next_crossing_time",
    "offroute_delay",
    "offroute_delay_bound",
    "onroute_delay",
    "onroute_delay_bound",
    "run",
    "sample_pedestrian_plan",
    "__version__",
]
