"""Aggregation of message lifecycles into reportable statistics.

Produces per-sensor delivery rates (delivered over generated within the
horizon), stage-wise delay samples with box-plot quantiles, delivery-rate
histograms, and the CSV/JSON exports consumed by plotting.

Quantiles use linear interpolation between closest ranks (numpy's default
"linear" method).  Undelivered messages count against delivery rates but
never contribute delay samples.  Stage delays only exist for messages
carrying both of the stage's timestamps:

    sensor_to_bus         on-route only, board minus generation
    bus_to_gateway        delivery minus board (any message that rode a bus)
    sensor_to_pedestrian  off-route, pickup minus generation
    pedestrian_to_bus     off-route, board minus pickup
    total                 delivery minus generation
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import SimulationResult
from .errors import MetricsError
from .scenario import OFF_ROUTE, ON_ROUTE

STAGES = (
    "sensor_to_bus",
    "bus_to_gateway",
    "sensor_to_pedestrian",
    "pedestrian_to_bus",
    "total",
)
KINDS = (ON_ROUTE, OFF_ROUTE)

DEFAULT_HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class StageSummary:
    """Box-plot statistics of one delay sample set, in seconds."""

    n: int
    min: float | None = None
    q1: float | None = None
    median: float | None = None
    q3: float | None = None
    max: float | None = None
    mean: float | None = None


def summarize(samples: np.ndarray) -> StageSummary:
    if len(samples) == 0:
        return StageSummary(n=0)
    lo, q1, med, q3, hi = np.quantile(samples, [0.0, 0.25, 0.5, 0.75, 1.0])
    return StageSummary(
        n=len(samples),
        min=float(lo),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(hi),
        mean=float(np.mean(samples)),
    )


@dataclass
class SensorStats:
    sensor_id: str
    kind: str
    generated: int
    delivered: int
    rates_by_seed: list[tuple[int, float]] = field(default_factory=list)

    @property
    def rate(self) -> float | None:
        """Mean per-seed delivery rate; None when no data was generated."""
        if not self.rates_by_seed:
            return None
        return sum(r for _, r in self.rates_by_seed) / len(self.rates_by_seed)


@dataclass
class MetricsReport:
    """Metrics for one run, or for a pool of runs after `aggregate_runs`."""

    seeds: list[int]
    horizon: float
    config_hash: str
    sensors: list[SensorStats]
    stage_samples: dict[tuple[str, str], np.ndarray]
    run_summaries: list[dict] = field(default_factory=list)

    def sensor(self, sensor_id: str) -> SensorStats:
        for s in self.sensors:
            if s.sensor_id == sensor_id:
                return s
        raise MetricsError(f"unknown sensor {sensor_id!r}")

    def stage_summary(self, stage: str, kind: str | None = None) -> StageSummary:
        return summarize(self.stage_delay_samples(stage, kind))

    def stage_delay_samples(self, stage: str, kind: str | None = None) -> np.ndarray:
        if stage not in STAGES:
            raise MetricsError(f"unknown stage {stage!r}; one of {STAGES}")
        if kind is None:
            parts = [self.stage_samples[stage, k] for k in KINDS]
            return np.concatenate(parts) if parts else np.empty(0)
        if kind not in KINDS:
            raise MetricsError(f"unknown sensor kind {kind!r}")
        return self.stage_samples[stage, kind]

    def rate_histogram(
        self, kind: str, bins: int = DEFAULT_HISTOGRAM_BINS
    ) -> tuple[np.ndarray, np.ndarray]:
        """(counts, bin_edges) over [0, 1] of per-sensor mean rates."""
        rates = [
            s.rate for s in self.sensors if s.kind == kind and s.rate is not None
        ]
        return np.histogram(np.array(rates, dtype=float), bins=bins, range=(0.0, 1.0))


def _message_kind_masks(result: SimulationResult) -> dict[str, np.ndarray]:
    kinds = np.empty(result.generated, dtype="U9")
    for s in range(len(result.sensor_ids)):
        kinds[result.sensor_slice(s)] = result.sensor_kinds[s]
    return {k: kinds == k for k in KINDS}


def _stage_mask_and_delay(
    result: SimulationResult, stage: str
) -> tuple[np.ndarray, np.ndarray]:
    gen, ped = result.msg_t_gen, result.t_ped
    board, deliv = result.t_board, result.t_deliv
    if stage == "sensor_to_bus":
        mask = np.isnan(ped) & ~np.isnan(board)
        return mask, board - gen
    if stage == "bus_to_gateway":
        mask = ~np.isnan(board) & ~np.isnan(deliv)
        return mask, deliv - board
    if stage == "sensor_to_pedestrian":
        mask = ~np.isnan(ped)
        return mask, ped - gen
    if stage == "pedestrian_to_bus":
        mask = ~np.isnan(ped) & ~np.isnan(board)
        return mask, board - ped
    if stage == "total":
        mask = ~np.isnan(deliv)
        return mask, deliv - gen
    raise MetricsError(f"unknown stage {stage!r}; one of {STAGES}")


def stage_delays(
    result: SimulationResult, stage: str, kind: str | None = None
) -> tuple[np.ndarray, StageSummary]:
    """Delay samples (seconds) and quantile summary for one stage."""
    mask, delay = _stage_mask_and_delay(result, stage)
    if kind is not None:
        if kind not in KINDS:
            raise MetricsError(f"unknown sensor kind {kind!r}")
        mask = mask & _message_kind_masks(result)[kind]
    samples = delay[mask]
    return samples, summarize(samples)


def delivery_rate(sensor_id: str, result: SimulationResult) -> float | None:
    """Delivered over generated for one sensor; None when nothing was
    generated within the horizon (explicitly not zero)."""
    try:
        index = result.sensor_ids.index(sensor_id)
    except ValueError:
        raise MetricsError(f"unknown sensor {sensor_id!r}") from None
    sl = result.sensor_slice(index)
    generated = sl.stop - sl.start
    if generated == 0:
        return None
    delivered = int(np.count_nonzero(~np.isnan(result.t_deliv[sl])))
    return delivered / generated


def compute_metrics(result: SimulationResult, config_hash: str = "") -> MetricsReport:
    kind_masks = _message_kind_masks(result)
    samples: dict[tuple[str, str], np.ndarray] = {}
    for stage in STAGES:
        mask, delay = _stage_mask_and_delay(result, stage)
        for kind in KINDS:
            samples[stage, kind] = np.sort(delay[mask & kind_masks[kind]])

    sensors = []
    for s, sensor_id in enumerate(result.sensor_ids):
        sl = result.sensor_slice(s)
        generated = sl.stop - sl.start
        delivered = int(np.count_nonzero(~np.isnan(result.t_deliv[sl])))
        rates = [(result.seed, delivered / generated)] if generated else []
        sensors.append(
            SensorStats(
                sensor_id=sensor_id,
                kind=result.sensor_kinds[s],
                generated=generated,
                delivered=delivered,
                rates_by_seed=rates,
            )
        )
    return MetricsReport(
        seeds=[result.seed],
        horizon=result.horizon,
        config_hash=config_hash,
        sensors=sensors,
        stage_samples=samples,
        run_summaries=[dict(result.summary, delivered=result.delivered,
                            generated=result.generated,
                            events_processed=result.events_processed)],
    )


def aggregate_runs(reports: list[MetricsReport]) -> MetricsReport:
    """Pool stage samples across seeds and average per-sensor rates,
    keeping per-seed rates as provenance.  Reports must share a config
    hash and horizon."""
    if not reports:
        raise MetricsError("nothing to aggregate")
    head = reports[0]
    for r in reports[1:]:
        if r.config_hash != head.config_hash:
            raise MetricsError(
                f"config hash mismatch: {r.config_hash} != {head.config_hash}"
            )
        if r.horizon != head.horizon:
            raise MetricsError("horizon mismatch across reports")

    samples = {
        key: np.concatenate([r.stage_samples[key] for r in reports])
        for key in head.stage_samples
    }
    by_sensor: dict[str, SensorStats] = {}
    for report in reports:
        for s in report.sensors:
            agg = by_sensor.get(s.sensor_id)
            if agg is None:
                by_sensor[s.sensor_id] = SensorStats(
                    sensor_id=s.sensor_id,
                    kind=s.kind,
                    generated=s.generated,
                    delivered=s.delivered,
                    rates_by_seed=list(s.rates_by_seed),
                )
            else:
                if agg.kind != s.kind:
                    raise MetricsError(f"sensor {s.sensor_id!r} changes kind across runs")
                agg.generated += s.generated
                agg.delivered += s.delivered
                agg.rates_by_seed.extend(s.rates_by_seed)
    return MetricsReport(
        seeds=[seed for r in reports for seed in r.seeds],
        horizon=head.horizon,
        config_hash=head.config_hash,
        sensors=list(by_sensor.values()),
        stage_samples=samples,
        run_summaries=[s for r in reports for s in r.run_summaries],
    )


# --- exports ----------------------------------------------------------------

MESSAGES_HEADER = [
    "message_id",
    "sensor_id",
    "kind",
    "t_generated",
    "t_pedestrian_pickup",
    "t_bus_board",
    "t_delivered",
    "delivery_path",
]
SENSOR_RATES_HEADER = ["sensor_id", "kind", "generated", "delivered", "rate"]
STAGE_QUANTILES_HEADER = [
    "stage",
    "kind",
    "min_s",
    "q1_s",
    "median_s",
    "q3_s",
    "max_s",
    "mean_s",
    "n",
]

#: Marker written to the rate column for sensors that generated nothing.
NO_DATA = "NA"


def _cell(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_messages_csv(result: SimulationResult, path: str | Path) -> None:
    """One row per message, ordered by sensor then generation time."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(MESSAGES_HEADER)
        for m in result.messages():
            writer.writerow(
                [
                    m.message_id,
                    m.sensor_id,
                    m.kind,
                    _cell(m.t_generated),
                    _cell(m.t_pedestrian_pickup),
                    _cell(m.t_bus_board),
                    _cell(m.t_delivered),
                    m.delivery_path or "",
                ]
            )


def write_sensor_rates_csv(report: MetricsReport, path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SENSOR_RATES_HEADER)
        for s in report.sensors:
            rate = s.rate
            writer.writerow(
                [
                    s.sensor_id,
                    s.kind,
                    s.generated,
                    s.delivered,
                    NO_DATA if rate is None else repr(float(rate)),
                ]
            )


def write_stage_quantiles_csv(report: MetricsReport, path: str | Path) -> None:
    """Fixed row set: every stage for each sensor kind, empty stats when
    there are no samples."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(STAGE_QUANTILES_HEADER)
        for stage in STAGES:
            for kind in KINDS:
                s = report.stage_summary(stage, kind)
                writer.writerow(
                    [
                        stage,
                        kind,
                        _cell(s.min),
                        _cell(s.q1),
                        _cell(s.median),
                        _cell(s.q3),
                        _cell(s.max),
                        _cell(s.mean),
                        s.n,
                    ]
                )


def write_summary_json(
    report: MetricsReport,
    path: str | Path,
    histogram_bins: int = DEFAULT_HISTOGRAM_BINS,
) -> None:
    histograms = {}
    for kind in KINDS:
        counts, edges = report.rate_histogram(kind, bins=histogram_bins)
        histograms[kind] = {
            "counts": counts.tolist(),
            "bin_edges": [float(e) for e in edges],
            "sensors_counted": int(counts.sum()),
        }
    payload = {
        "seeds": report.seeds,
        "horizon_s": report.horizon,
        "config_hash": report.config_hash,
        "generated": sum(s.generated for s in report.sensors),
        "delivered": sum(s.delivered for s in report.sensors),
        "delivery_rate_histograms": histograms,
        "stage_medians_s": {
            f"{stage}[{kind}]": report.stage_summary(stage, kind).median
            for stage in STAGES
            for kind in KINDS
        },
        "runs": report.run_summaries,
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
