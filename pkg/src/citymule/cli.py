"""Command-line harness: profile, estimate, simulate, sweep.

Exit codes: 0 success, 1 usage or configuration error, 2 input-data
error, 3 internal invariant violation.  Default output directory comes
from $CITYMULE_OUT, else ./citymule-out.

Seed runs are independent; with --jobs > 1 they execute in a process
pool, and results are buffered and written in seed order so exports are
byte-identical regardless of parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, engine, gtfs, metrics, units
from .errors import ConfigurationError, FeedFormatError, InvariantViolation
from .geometry import Bus, RouteCircle
from .latency import (
    nearest_gateway,
    offroute_delay,
    offroute_delay_bound,
    onroute_delay,
    onroute_delay_bound,
)
from .scenario import (
    ScenarioConfig,
    apply_overrides,
    build_scenario,
    config_hash,
    load_config,
    sweepable_keys,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_INVARIANT = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the harness contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def default_out_dir() -> Path:
    return Path(os.environ.get("CITYMULE_OUT", "citymule-out"))


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_manifest(out_dir: Path, payload: dict) -> None:
    payload = dict(payload, tool_version=__version__)
    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, out_dir / "manifest.json")


def _parse_seeds(spec: str) -> list[int]:
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        seeds = list(range(int(lo), int(hi) + 1))
    else:
        seeds = [int(s) for s in spec.split(",")]
    if not seeds:
        raise ConfigurationError(f"empty seed specification {spec!r}")
    return seeds


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


# --- profile -----------------------------------------------------------------

def _stats_table(stats: gtfs.FeedStatistics) -> str:
    rows = [
        ("routes", f"{stats.route_count}"),
        ("distance of routes", f"mean {stats.distance_mean_km:.3f} km, "
                               f"std {stats.distance_std_km:.3f} km"),
        ("stops per route", f"mean {stats.stops_mean:.2f}, std {stats.stops_std:.2f}"),
        ("buses per route", f"mean {stats.buses_mean:.2f}, std {stats.buses_std:.2f}"),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def cmd_profile(args) -> int:
    profiles = gtfs.parse_feed(args.feed)
    if not profiles:
        raise FeedFormatError(f"feed {args.feed} yielded no usable routes")
    stats = gtfs.feed_statistics(profiles)
    print(_stats_table(stats))
    if args.stats_only:
        return EXIT_OK

    out_path = Path(args.out) if args.out else default_out_dir() / "route_profiles.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    gtfs.write_route_profiles(profiles, out_path)
    outputs = [str(out_path)]
    if args.stats_csv:
        stats_path = Path(args.stats_csv)
        stats_path.parent.mkdir(parents=True, exist_ok=True)
        with open(stats_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["metric", "mean", "std"])
            writer.writerow(["distance_km", repr(stats.distance_mean_km), repr(stats.distance_std_km)])
            writer.writerow(["stops_per_route", repr(stats.stops_mean), repr(stats.stops_std)])
            writer.writerow(["buses_per_route", repr(stats.buses_mean), repr(stats.buses_std)])
        outputs.append(str(stats_path))
    print(f"wrote {', '.join(outputs)}")
    return EXIT_OK


# --- estimate ----------------------------------------------------------------

def cmd_estimate(args) -> int:
    circumference = units.parse_distance(args.circumference)
    speed = units.parse_speed(args.speed)
    gateways = tuple(units.parse_distance(g) for g in args.gateway_at)
    route = RouteCircle(
        "estimate", circumference, stops=gateways, gateway_positions=gateways
    )
    bus = Bus("bus", "estimate", units.parse_distance(args.bus_at), speed)
    sensor = units.parse_distance(args.sensor_at)
    t = units.parse_duration(args.at_time)

    on = onroute_delay(route, bus, sensor, t)
    bound_on = onroute_delay_bound(route, bus)
    payload = {
        "circumference_km": circumference,
        "speed_kmh": speed,
        "gateway_km": nearest_gateway(route, sensor),
        "sensor_to_bus_s": on.sensor_to_bus,
        "bus_to_gateway_s": on.bus_to_gateway,
        "onroute_total_s": on.total,
        "onroute_bound_s": bound_on,
    }
    off = None
    if args.sensor_wait is not None or args.carrier_wait is not None:
        sensor_wait = units.parse_duration(args.sensor_wait or "0s")
        carrier_wait = units.parse_duration(args.carrier_wait or "0s")
        off = offroute_delay(sensor_wait, carrier_wait, route, bus, sensor, t)
        payload.update(
            {
                "sensor_to_pedestrian_s": off.sensor_to_pedestrian,
                "pedestrian_to_bus_s": off.pedestrian_to_bus,
                "offroute_total_s": off.total,
            }
        )
    if args.max_sensor_wait is not None and args.max_carrier_wait is not None:
        payload["offroute_bound_s"] = offroute_delay_bound(
            units.parse_duration(args.max_sensor_wait),
            units.parse_duration(args.max_carrier_wait),
            route,
            bus,
        )

    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return EXIT_OK

    fd = units.format_duration
    print(f"route: circumference {circumference:g} km, bus speed {speed:g} km/h")
    print(f"sensor->bus wait   {fd(on.sensor_to_bus)}")
    print(f"bus->gateway carry {fd(on.bus_to_gateway)}  (gateway at {payload['gateway_km']:g} km)")
    print(f"on-route total     {fd(on.total)}")
    print(f"on-route bound     {fd(bound_on)}  (two loops)")
    if off is not None:
        print(f"sensor->pedestrian {fd(off.sensor_to_pedestrian)}")
        print(f"pedestrian->bus    {fd(off.pedestrian_to_bus)}")
        print(f"off-route total    {fd(off.total)}")
    if "offroute_bound_s" in payload:
        print(f"off-route bound    {fd(payload['offroute_bound_s'])}")
    return EXIT_OK


# --- simulate ----------------------------------------------------------------

def _load_and_override(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    if args.set:
        config = apply_overrides(config, _parse_overrides(args.set))
    if args.duration:
        config = apply_overrides(config, {"duration": args.duration})
    return config


def _run_seed(payload: tuple[ScenarioConfig, int, float, str]) -> tuple:
    config, seed, horizon, chash = payload
    scenario = build_scenario(
        apply_overrides(config, {"seed": str(seed)})
    )
    result = engine.run(scenario, horizon)
    report = metrics.compute_metrics(result, chash)
    return seed, result, report


def _run_seeds(config: ScenarioConfig, seeds: list[int], jobs: int):
    chash = config_hash(config)
    horizon = config.duration_s
    payloads = [(config, seed, horizon, chash) for seed in seeds]
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            yield from pool.map(_run_seed, payloads)
    else:
        for payload in payloads:
            yield _run_seed(payload)


def _export_run(out_dir: Path, seed: int, result, report) -> list[str]:
    run_dir = out_dir / f"seed_{seed:04d}"
    run_dir.mkdir(parents=True, exist_ok=True)
    metrics.write_messages_csv(result, run_dir / "messages.csv")
    metrics.write_sensor_rates_csv(report, run_dir / "sensor_rates.csv")
    metrics.write_stage_quantiles_csv(report, run_dir / "stage_quantiles.csv")
    metrics.write_summary_json(report, run_dir / "summary.json")
    return [
        str(run_dir / name)
        for name in ("messages.csv", "sensor_rates.csv", "stage_quantiles.csv", "summary.json")
    ]


def cmd_simulate(args) -> int:
    started = _utc_now()
    config = _load_and_override(args)
    seeds = _parse_seeds(args.seeds)
    out_dir = Path(args.out) if args.out else default_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)

    outputs: list[str] = []
    reports = []
    for seed, result, report in _run_seeds(config, seeds, args.jobs):
        outputs.extend(_export_run(out_dir, seed, result, report))
        reports.append(report)
        print(
            f"seed {seed}: generated {result.generated}, delivered {result.delivered}"
            f" ({result.core_used} core, {result.events_processed} events)"
        )

    aggregate = metrics.aggregate_runs(reports)
    agg_dir = out_dir / "aggregate"
    agg_dir.mkdir(parents=True, exist_ok=True)
    metrics.write_sensor_rates_csv(aggregate, agg_dir / "sensor_rates.csv")
    metrics.write_stage_quantiles_csv(aggregate, agg_dir / "stage_quantiles.csv")
    metrics.write_summary_json(aggregate, agg_dir / "summary.json")
    outputs.extend(
        str(agg_dir / n) for n in ("sensor_rates.csv", "stage_quantiles.csv", "summary.json")
    )

    for path in outputs:
        if not Path(path).is_file():
            raise InvariantViolation(f"declared output {path} was not written")
    _write_manifest(
        out_dir,
        {
            "command": "simulate",
            "argv": sys.argv[1:],
            "config_hash": config_hash(config),
            "seeds": seeds,
            "output_dir": str(out_dir),
            "outputs": sorted(outputs),
            "started_utc": started,
            "finished_utc": _utc_now(),
        },
    )
    print(f"wrote {len(outputs)} files under {out_dir}")
    return EXIT_OK


# --- sweep -------------------------------------------------------------------

def _expand_param(spec: str) -> tuple[str, list[str]]:
    if "=" not in spec:
        raise ConfigurationError(f"--param expects key=values, got {spec!r}")
    key, raw = spec.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    if ".." in raw:
        lo, hi = raw.split("..", 1)
        values = [str(v) for v in range(int(lo), int(hi) + 1)]
    else:
        values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigurationError(f"--param {key}: no values given")
    return key, values


def _grid_points(params: list[tuple[str, list[str]]]) -> list[dict[str, str]]:
    points = [{}]
    for key, values in params:
        points = [dict(point, **{key: v}) for point in points for v in values]
    return points


def _aggregate_row(aggregate: metrics.MetricsReport) -> dict[str, float | int | None]:
    def rate_mean(kind: str) -> float | None:
        rates = [s.rate for s in aggregate.sensors if s.kind == kind and s.rate is not None]
        return sum(rates) / len(rates) if rates else None

    def median(stage: str, kind: str) -> float | None:
        return aggregate.stage_summary(stage, kind).median

    return {
        "onroute_rate_mean": rate_mean("on-route"),
        "offroute_rate_mean": rate_mean("off-route"),
        "sensor_to_bus_median_s": median("sensor_to_bus", "on-route"),
        "bus_to_gateway_median_s": median("bus_to_gateway", "on-route"),
        "sensor_to_pedestrian_median_s": median("sensor_to_pedestrian", "off-route"),
        "pedestrian_to_bus_median_s": median("pedestrian_to_bus", "off-route"),
        "onroute_total_median_s": median("total", "on-route"),
        "offroute_total_median_s": median("total", "off-route"),
        "generated": sum(s.generated for s in aggregate.sensors),
        "delivered": sum(s.delivered for s in aggregate.sensors),
    }


def cmd_sweep(args) -> int:
    started = _utc_now()
    if not args.param:
        raise ConfigurationError(
            f"sweep needs at least one --param; sweepable keys: {', '.join(sweepable_keys())}"
        )
    base_config = _load_and_override(args)
    params = [_expand_param(p) for p in args.param]
    points = _grid_points(params)
    seeds = _parse_seeds(args.seeds)
    out_dir = Path(args.out) if args.out else default_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)

    keys = [key for key, _ in params]
    rows = []
    for index, point in enumerate(points):
        config = apply_overrides(base_config, point)
        reports = [r for _, _, r in _run_seeds(config, seeds, args.jobs)]
        aggregate = metrics.aggregate_runs(reports)
        row = dict(point)
        row.update(_aggregate_row(aggregate))
        rows.append(row)
        print(f"grid point {index}: " + ", ".join(f"{k}={v}" for k, v in point.items()))

    sweep_path = out_dir / "sweep_results.csv"
    metric_keys = [k for k in rows[0] if k not in keys]
    with open(sweep_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(keys + metric_keys)
        for row in rows:
            writer.writerow(
                [row[k] for k in keys]
                + ["" if row[k] is None else repr(float(row[k])) for k in metric_keys]
            )

    _write_manifest(
        out_dir,
        {
            "command": "sweep",
            "argv": sys.argv[1:],
            "config_hash": config_hash(base_config),
            "seeds": seeds,
            "grid": [dict(p) for p in points],
            "output_dir": str(out_dir),
            "outputs": [str(sweep_path)],
            "started_utc": started,
            "finished_utc": _utc_now(),
        },
    )
    print(f"wrote {sweep_path}")
    return EXIT_OK


# --- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="citymule", description=__doc__)
    parser.add_argument("--version", action="version", version=f"citymule {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="characterize a GTFS feed into route profiles")
    p.add_argument("feed", help="GTFS directory or .zip archive")
    p.add_argument("--out", help="route-profile JSON path")
    p.add_argument("--stats-csv", help="also export the statistics table as CSV")
    p.add_argument("--stats-only", action="store_true", help="print statistics, write nothing")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("estimate", help="closed-form latency estimate for one route")
    p.add_argument("--circumference", required=True, help="route loop length, e.g. 15km")
    p.add_argument("--speed", required=True, help="bus speed, e.g. 20km/h")
    p.add_argument("--bus-at", default="0km", help="bus position at the given time")
    p.add_argument("--sensor-at", required=True, help="sensor arc position")
    p.add_argument(
        "--gateway-at",
        action="append",
        required=True,
        help="gateway arc position (repeatable; nearest ahead is used)",
    )
    p.add_argument("--at-time", default="0s", help="evaluation time, e.g. 30min")
    p.add_argument("--sensor-wait", help="expected sensor->pedestrian delay (off-route)")
    p.add_argument("--carrier-wait", help="expected pedestrian->bus delay (off-route)")
    p.add_argument("--max-sensor-wait", help="worst-case sensor->pedestrian delay")
    p.add_argument("--max-carrier-wait", help="worst-case pedestrian->bus delay")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_estimate)

    for name, help_text in (
        ("simulate", "run seeded simulations and export metrics"),
        ("sweep", "aggregate metrics over a config parameter grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="scenario config JSON file")
        p.add_argument("--seeds", default="0..99", help="'A..B' inclusive or comma list")
        p.add_argument("--duration", help="simulation horizon override, e.g. 48h")
        p.add_argument("--out", help="output directory (default $CITYMULE_OUT)")
        p.add_argument("--jobs", type=int, default=1, help="parallel seed runs")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="config override using config-file keys",
        )
        if name == "sweep":
            p.add_argument(
                "--param",
                action="append",
                default=[],
                metavar="KEY=V1,V2|A..B",
                help="grid dimension (repeatable)",
            )
            p.set_defaults(func=cmd_sweep)
        else:
            p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FeedFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, PermissionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
