""" Throughput and latency from pipeline timelines.

Throughput: the run, from the first to the last insertion, is cut into 30 s intervals
aligned to the first insertion. Each interval's value is insertions / width and the
throughput is the largest value. A trailing partial interval shorter than half the
width is discarded, a longer one is divided by its true width.

Latency: each session's inserted_at - created_at, averaged per 10 s interval of
inserted_at (again aligned to the first insertion). The latency is the median of the
interval averages.
"""
import io
import json
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import attr
import numpy as np
import pandas as pd

from nids.errors import ConfigError, EmptyInputError
from nids.pipeline.engine import RunSummary, stage_busy_ratio
from nids.pipeline.records import TimelineEvent
from utils.serialization import from_native_types, to_native_types

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
THROUGHPUT_INTERVAL_S = 30.0
LATENCY_INTERVAL_S = 10.0
SATURATION_TOLERANCE = 0.05
DEFAULT_RUNS = 3

_NS_PER_S = 1_000_000_000
_NS_PER_MS = 1_000_000


def _inserted(events: Sequence[TimelineEvent]) -> List[TimelineEvent]:
    inserted = [e for e in events if e.inserted_at is not None]
    if not inserted:
        raise EmptyInputError("no inserted sessions to measure")
    return inserted


def compute_throughput(
    events: Sequence[TimelineEvent],
    interval_s: float = THROUGHPUT_INTERVAL_S,
) -> Tuple[float, List[float]]:
    """ Returns (sessions per second, per-interval values). Insertions at the very last instant close the run. """
    stamps = np.array([e.inserted_at for e in _inserted(events)], dtype=np.int64)
    first, last = int(stamps.min()), int(stamps.max())
    interval_ns = int(round(interval_s * _NS_PER_S))
    span = last - first

    widths = [interval_ns] * (span // interval_ns)
    remainder = span - len(widths) * interval_ns
    if remainder > 0 and 2 * remainder >= interval_ns:
        widths.append(remainder)
    if not widths:
        raise EmptyInputError(
            f"insertions span {span / _NS_PER_S:.3f}s, less than half of one {interval_s:g}s interval "
            f"(bench.throughput_interval_s)"
        )

    in_run = stamps[stamps < last]
    counts = np.bincount((in_run - first) // interval_ns, minlength=len(widths))[:len(widths)]
    values = [float(count) / (width / _NS_PER_S) for count, width in zip(counts, widths)]
    return max(values), values


def check_run_length(n_sessions: int, rate_or_none: Optional[float], interval_s: float = THROUGHPUT_INTERVAL_S):
    """ A paced replay of n sessions lasts about n / rate seconds. Less than half an interval measures nothing. """
    if rate_or_none is None:
        return
    expected_s = n_sessions / rate_or_none
    if 2 * expected_s < interval_s:
        raise ConfigError(
            f"{n_sessions} sessions at {rate_or_none:g}/s last about {expected_s:.1f}s, a {interval_s:g}s throughput "
            f"interval needs at least {interval_s / 2:g}s: replay more sessions, lower the rate or shorten "
            f"bench.throughput_interval_s"
        )


def compute_latency(
    events: Sequence[TimelineEvent],
    interval_s: float = LATENCY_INTERVAL_S,
) -> Tuple[float, List[float]]:
    """ Returns (median interval average in ms, per-interval averages in ms). Intervals without insertions are skipped. """
    inserted = _inserted(events)
    stamps = np.array([e.inserted_at for e in inserted], dtype=np.int64)
    latencies_ms = np.array([e.inserted_at - e.created_at for e in inserted], dtype=np.float64) / _NS_PER_MS
    interval_ns = int(round(interval_s * _NS_PER_S))

    buckets = (stamps - stamps.min()) // interval_ns
    n = int(buckets.max()) + 1
    sums = np.bincount(buckets, weights=latencies_ms, minlength=n)
    counts = np.bincount(buckets, minlength=n)
    averages = [float(s / c) for s, c in zip(sums, counts) if c > 0]
    return float(np.median(averages)), averages


# ---------------------------------------------------------------------------------------------------------------------
# reports

@attr.define
class RunMetadata:
    classifier: str
    params: Dict[str, Any] = attr.Factory(dict)
    rate: Optional[float] = None        # None means unlimited
    duration_s: float = 0.0
    seed: int = 0
    sessions: int = 0
    classifier_worker_count: int = 1
    throughput_interval_s: float = THROUGHPUT_INTERVAL_S
    latency_interval_s: float = LATENCY_INTERVAL_S


@attr.define
class BenchReport:
    throughput_sessions_per_s: float
    latency_ms: float
    throughput_intervals: List[float]
    latency_intervals_ms: List[float]
    busy_ratios: Dict[str, float]
    metadata: RunMetadata
    schema_version: int = REPORT_SCHEMA_VERSION

    @classmethod
    def from_summary(cls, summary: RunSummary, metadata: RunMetadata) -> 'BenchReport':
        """ Interval widths come from the metadata, so the report says how it was measured. """
        throughput, throughput_table = compute_throughput(summary.timelines, metadata.throughput_interval_s)
        latency, latency_table = compute_latency(summary.timelines, metadata.latency_interval_s)
        metadata = attr.evolve(metadata, duration_s=summary.wall_ns / _NS_PER_S, sessions=summary.sessions_out)
        return cls(
            throughput_sessions_per_s=throughput,
            latency_ms=latency,
            throughput_intervals=throughput_table,
            latency_intervals_ms=latency_table,
            busy_ratios=dict(sorted(stage_busy_ratio(summary).items())),
            metadata=metadata,
        )

    def to_dict(self) -> Dict[str, Any]:
        data = to_native_types(self)
        return {'schema_version': data.pop('schema_version'), **data}


def report_from_dict(data: Dict[str, Any]) -> BenchReport:
    return from_native_types(data, BenchReport)


def emit_report(report: BenchReport, fmt: str = 'json') -> bytes:
    match fmt:
        case 'json':
            return (json.dumps(report.to_dict(), indent=2) + '\n').encode()
        case 'csv':
            rows = [('throughput', i, v) for i, v in enumerate(report.throughput_intervals)]
            rows += [('latency_ms', i, v) for i, v in enumerate(report.latency_intervals_ms)]
            rows += [(f'busy_ratio.{stage}', '', v) for stage, v in sorted(report.busy_ratios.items())]
            table = pd.DataFrame(rows, columns=['metric', 'interval_index', 'value'])
            buffer = io.StringIO()
            table.to_csv(buffer, index=False)
            return buffer.getvalue().encode()
        case _:
            raise ValueError(f"unknown report format {fmt!r}, expected json or csv")


# ---------------------------------------------------------------------------------------------------------------------
# several runs

@attr.define
class Spread:
    mean: float
    min: float
    max: float

    @classmethod
    def of(cls, values: Sequence[float]) -> 'Spread':
        return cls(float(np.mean(values)), float(np.min(values)), float(np.max(values)))


@attr.define
class AggregateReport:
    runs: int
    throughput_sessions_per_s: Spread
    latency_ms: Spread


def aggregate_reports(reports: Sequence[BenchReport]) -> AggregateReport:
    if not reports:
        raise EmptyInputError("no reports to aggregate")
    return AggregateReport(
        runs=len(reports),
        throughput_sessions_per_s=Spread.of([r.throughput_sessions_per_s for r in reports]),
        latency_ms=Spread.of([r.latency_ms for r in reports]),
    )


def emit_suite(reports: Sequence[BenchReport]) -> bytes:
    """ Sub-reports plus their aggregate, as one JSON document. """
    document = {
        'schema_version': REPORT_SCHEMA_VERSION,
        'runs': [r.to_dict() for r in reports],
        'aggregate': to_native_types(aggregate_reports(reports)),
    }
    return (json.dumps(document, indent=2) + '\n').encode()


# ---------------------------------------------------------------------------------------------------------------------
# rate ramp and classifier choice

def ramp_rates(start: float, stop: float, steps: int) -> List[float]:
    if steps < 1 or not 0 < start <= stop:
        raise ValueError(f"bad ramp {start=} {stop=} {steps=}")
    return [float(r) for r in np.linspace(start, stop, steps)]


def find_saturation_rate(
    results: Sequence[Tuple[float, float]],
    tolerance: float = SATURATION_TOLERANCE,
) -> Optional[float]:
    """ results: (offered rate, measured throughput). The highest rate the pipeline still keeps up with. """
    keeping_up = [rate for rate, throughput in results if throughput >= (1.0 - tolerance) * rate]
    return max(keeping_up) if keeping_up else None


@attr.frozen
class ClassifierCandidate:
    algorithm: str
    f1: float
    throughput_sessions_per_s: float


def recommend_classifier(
    candidates: Sequence[ClassifierCandidate],
    offered_rate: float,
) -> Optional[ClassifierCandidate]:
    """ Best F1 among the classifiers fast enough for the offered rate; ties go to the faster one. """
    fast_enough = [c for c in candidates if c.throughput_sessions_per_s >= offered_rate]
    if not fast_enough:
        logger.info(f"no classifier keeps up with {offered_rate} sessions/s")
        return None
    return max(fast_enough, key=lambda c: (c.f1, c.throughput_sessions_per_s))
