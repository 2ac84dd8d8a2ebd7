"""Static GTFS ingestion into per-route profiles.

Reads a feed directory or .zip archive (routes, trips, stops, stop_times;
shapes and frequencies when present) and produces one `RouteProfile` per
route: loop distance, distinct stop count, and peak concurrent vehicles.

Distance rules: the representative trip is the longest one; its length is
the shape polyline length when the trip has a shape, otherwise the summed
haversine distance over its ordered stops.  A trip that returns to its
first stop is a loop and its length is the loop distance; otherwise the
route is out-and-back and the loop distance is twice the one-way length.

Vehicle counts come from frequencies.txt when the route has entries there
(ceil of trip duration over headway), else from the maximum number of
simultaneously active trips in stop_times.

Results are independent of row order within every file.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import zipfile
from dataclasses import dataclass
from pathlib import Path

from .errors import FeedFormatError, MetricsError
from .scenario import RouteProfile

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088

REQUIRED_FILES = ("routes.txt", "trips.txt", "stops.txt", "stop_times.txt")


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance on the mean-radius sphere, in kilometres."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(a))


def polyline_length_km(points: list[tuple[float, float]]) -> float:
    return sum(
        haversine_km(points[i][0], points[i][1], points[i + 1][0], points[i + 1][1])
        for i in range(len(points) - 1)
    )


def _parse_gtfs_time(text: str, where: str) -> float | None:
    """'HH:MM:SS' (hours may exceed 24) into seconds; blank is allowed."""
    text = text.strip()
    if not text:
        return None
    parts = text.split(":")
    if len(parts) != 3:
        raise FeedFormatError(f"{where}: bad time {text!r}")
    try:
        h, m, s = (int(p) for p in parts)
    except ValueError:
        raise FeedFormatError(f"{where}: bad time {text!r}") from None
    if m >= 60 or s >= 60 or h < 0 or m < 0 or s < 0:
        raise FeedFormatError(f"{where}: bad time {text!r}")
    return h * 3600.0 + m * 60.0 + s


class _FeedReader:
    """Uniform access to a GTFS directory or zip archive."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.name = self.path.name
        if self.path.is_dir():
            self._zip = None
        elif self.path.is_file() and self.path.suffix.lower() == ".zip":
            self._zip = zipfile.ZipFile(self.path)
        else:
            raise FeedFormatError(f"feed path {self.path} is not a directory or .zip")

    def has(self, name: str) -> bool:
        if self._zip is None:
            return (self.path / name).is_file()
        return name in self._zip.namelist()

    def open(self, name: str) -> io.TextIOBase:
        if not self.has(name):
            raise FeedFormatError(f"feed {self.name} is missing required file {name}")
        if self._zip is None:
            return open(self.path / name, encoding="utf-8-sig", newline="")
        return io.TextIOWrapper(self._zip.open(name), encoding="utf-8-sig", newline="")


def _read_rows(feed: _FeedReader, name: str, required: tuple[str, ...]) -> list[dict]:
    rows = []
    with feed.open(name) as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise FeedFormatError(f"{name}: missing required column {col!r}")
        for line, row in enumerate(reader, start=2):
            for col in required:
                if row.get(col) is None or not row[col].strip():
                    raise FeedFormatError(f"{name} line {line}: empty {col!r}")
            row["_line"] = line
            rows.append(row)
    return rows


def _float(row: dict, col: str, name: str) -> float:
    try:
        return float(row[col])
    except ValueError:
        raise FeedFormatError(
            f"{name} line {row['_line']}: bad number {row[col]!r} in {col!r}"
        ) from None


def parse_feed(path: str | Path) -> list[RouteProfile]:
    """Profiles for every route in the feed, sorted by route id.

    Routes whose representative trip has zero length are excluded with a
    logged warning.
    """
    feed = _FeedReader(path)
    for name in REQUIRED_FILES:
        if not feed.has(name):
            raise FeedFormatError(f"feed {feed.name} is missing required file {name}")

    stops: dict[str, tuple[float, float]] = {}
    for row in _read_rows(feed, "stops.txt", ("stop_id", "stop_lat", "stop_lon")):
        stops[row["stop_id"]] = (
            _float(row, "stop_lat", "stops.txt"),
            _float(row, "stop_lon", "stops.txt"),
        )

    routes: dict[str, str] = {}
    for row in _read_rows(feed, "routes.txt", ("route_id",)):
        name = (row.get("route_long_name") or row.get("route_short_name") or "").strip()
        routes[row["route_id"]] = name or row["route_id"]

    trips_by_route: dict[str, list[str]] = {}
    trip_shape: dict[str, str] = {}
    for row in _read_rows(feed, "trips.txt", ("route_id", "trip_id")):
        if row["route_id"] not in routes:
            raise FeedFormatError(
                f"trips.txt line {row['_line']}: unknown route {row['route_id']!r}"
            )
        trips_by_route.setdefault(row["route_id"], []).append(row["trip_id"])
        shape_id = (row.get("shape_id") or "").strip()
        if shape_id:
            trip_shape[row["trip_id"]] = shape_id

    stop_times: dict[str, list[tuple[int, str, float | None]]] = {}
    for row in _read_rows(
        feed, "stop_times.txt", ("trip_id", "stop_id", "stop_sequence")
    ):
        where = f"stop_times.txt line {row['_line']}"
        try:
            seq = int(row["stop_sequence"])
        except ValueError:
            raise FeedFormatError(f"{where}: bad stop_sequence") from None
        if row["stop_id"] not in stops:
            raise FeedFormatError(f"{where}: unknown stop {row['stop_id']!r}")
        arrival = _parse_gtfs_time(row.get("arrival_time") or "", where)
        if arrival is None:
            arrival = _parse_gtfs_time(row.get("departure_time") or "", where)
        stop_times.setdefault(row["trip_id"], []).append((seq, row["stop_id"], arrival))
    for trip in stop_times.values():
        trip.sort(key=lambda item: item[0])

    shapes: dict[str, list[tuple[int, float, float]]] = {}
    if feed.has("shapes.txt"):
        for row in _read_rows(
            feed,
            "shapes.txt",
            ("shape_id", "shape_pt_lat", "shape_pt_lon", "shape_pt_sequence"),
        ):
            try:
                seq = int(row["shape_pt_sequence"])
            except ValueError:
                raise FeedFormatError(
                    f"shapes.txt line {row['_line']}: bad shape_pt_sequence"
                ) from None
            shapes.setdefault(row["shape_id"], []).append(
                (
                    seq,
                    _float(row, "shape_pt_lat", "shapes.txt"),
                    _float(row, "shape_pt_lon", "shapes.txt"),
                )
            )
        for pts in shapes.values():
            pts.sort(key=lambda item: item[0])

    frequencies: dict[str, list[float]] = {}
    if feed.has("frequencies.txt"):
        for row in _read_rows(
            feed, "frequencies.txt", ("trip_id", "start_time", "end_time", "headway_secs")
        ):
            where = f"frequencies.txt line {row['_line']}"
            try:
                headway = float(row["headway_secs"])
            except ValueError:
                raise FeedFormatError(f"{where}: bad headway_secs") from None
            if headway <= 0:
                raise FeedFormatError(f"{where}: headway must be positive")
            frequencies.setdefault(row["trip_id"], []).append(headway)

    profiles = []
    for route_id in sorted(routes):
        trip_ids = sorted(trips_by_route.get(route_id, []))
        if not trip_ids:
            log.warning("route %s has no trips; excluded", route_id)
            continue

        distinct_stops = {
            stop_id for t in trip_ids for _, stop_id, _ in stop_times.get(t, [])
        }

        best_trip, best_length = None, -1.0
        for trip_id in trip_ids:
            sequence = stop_times.get(trip_id, [])
            shape_id = trip_shape.get(trip_id)
            if shape_id and shape_id in shapes:
                length = polyline_length_km(
                    [(lat, lon) for _, lat, lon in shapes[shape_id]]
                )
            else:
                length = polyline_length_km([stops[sid] for _, sid, _ in sequence])
            if length > best_length:
                best_trip, best_length = trip_id, length
        sequence = stop_times.get(best_trip, [])
        is_loop = len(sequence) >= 2 and sequence[0][1] == sequence[-1][1]
        distance = best_length if is_loop else 2.0 * best_length
        if distance <= 0.0:
            log.warning("route %s has zero distance; excluded", route_id)
            continue

        bus_count = _bus_count(trip_ids, stop_times, frequencies)
        profiles.append(
            RouteProfile(
                route_id=route_id,
                route_name=routes[route_id],
                distance_km=distance,
                stop_count=len(distinct_stops),
                bus_count=bus_count,
                source=feed.name,
            )
        )
    return profiles


def _bus_count(
    trip_ids: list[str],
    stop_times: dict[str, list[tuple[int, str, float | None]]],
    frequencies: dict[str, list[float]],
) -> int:
    spans: dict[str, tuple[float, float]] = {}
    for trip_id in trip_ids:
        times = [t for _, _, t in stop_times.get(trip_id, []) if t is not None]
        if len(times) >= 2:
            spans[trip_id] = (times[0], times[-1])

    freq_trips = [t for t in trip_ids if t in frequencies]
    if freq_trips:
        peak = 0
        for trip_id in freq_trips:
            if trip_id not in spans:
                continue
            duration = spans[trip_id][1] - spans[trip_id][0]
            for headway in frequencies[trip_id]:
                peak = max(peak, math.ceil(duration / headway))
        return max(1, peak)

    events = []
    for start, end in spans.values():
        events.append((start, 1))
        events.append((end, -1))
    events.sort()  # at equal times the -1 sorts first: back-to-back reuse
    peak = running = 0
    for _, delta in events:
        running += delta
        peak = max(peak, running)
    return max(1, peak)


@dataclass(frozen=True)
class FeedStatistics:
    """Mean and population standard deviation per profile field."""

    route_count: int
    distance_mean_km: float
    distance_std_km: float
    stops_mean: float
    stops_std: float
    buses_mean: float
    buses_std: float


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    variance = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(variance)


def feed_statistics(profiles: list[RouteProfile]) -> FeedStatistics:
    if not profiles:
        raise MetricsError("cannot compute statistics of an empty profile list")
    d_mean, d_std = _mean_std([p.distance_km for p in profiles])
    s_mean, s_std = _mean_std([float(p.stop_count) for p in profiles])
    b_mean, b_std = _mean_std([float(p.bus_count) for p in profiles])
    return FeedStatistics(
        route_count=len(profiles),
        distance_mean_km=d_mean,
        distance_std_km=d_std,
        stops_mean=s_mean,
        stops_std=s_std,
        buses_mean=b_mean,
        buses_std=b_std,
    )


# --- profile file round-trip -------------------------------------------------

def write_route_profiles(profiles: list[RouteProfile], path: str | Path) -> None:
    import json

    payload = {
        "routes": [
            {
                "route_id": p.route_id,
                "route_name": p.route_name,
                "distance_km": p.distance_km,
                "stop_count": p.stop_count,
                "bus_count": p.bus_count,
                "source": p.source,
            }
            for p in profiles
        ]
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_route_profiles(path: str | Path) -> list[RouteProfile]:
    import json

    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return [RouteProfile(**entry) for entry in payload["routes"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FeedFormatError(f"bad route-profile file {path}: {exc}") from exc
