import io
import json

import numpy as np
import pandas as pd
import pytest

from nids.benchmark import (
    BenchReport, ClassifierCandidate, RunMetadata, aggregate_reports, check_run_length, compute_latency,
    compute_throughput, emit_report, emit_suite, find_saturation_rate, ramp_rates, recommend_classifier,
    report_from_dict,
)
from nids.errors import ConfigError, EmptyInputError
from nids.pipeline import RunSummary
from nids.pipeline.records import TimelineEvent

NS = 1_000_000_000
N_ORACLE_TIMELINES = 30
N_ORACLE_TIMELINES_FULL = 1_000


def _events(inserted_s, latency_ms=1.0, start_ns=5 * NS):
    """ One complete timeline per insertion time (seconds from the run start). """
    if np.isscalar(latency_ms):
        latency_ms = [latency_ms] * len(inserted_s)
    events = []
    for i, (t, latency) in enumerate(zip(inserted_s, latency_ms)):
        inserted_at = start_ns + int(round(t * NS))
        created_at = inserted_at - int(round(latency * 1e6))
        events.append(TimelineEvent(i + 1, created_at, created_at, created_at, inserted_at))
    return events


def _naive_throughput(stamps_ns, interval_ns):
    first, last = min(stamps_ns), max(stamps_ns)
    values, start = [], first
    while start < last:
        end = min(start + interval_ns, last)
        if end - start == interval_ns or 2 * (end - start) >= interval_ns:
            count = sum(1 for s in stamps_ns if start <= s < end)
            values.append(count / ((end - start) / NS))
        start += interval_ns
    return max(values) if values else None


def _naive_latency(events, interval_ns):
    first = min(e.inserted_at for e in events)
    buckets = {}
    for e in events:
        buckets.setdefault((e.inserted_at - first) // interval_ns, []).append((e.inserted_at - e.created_at) / 1e6)
    # plain running sums, in insertion order
    return float(np.median([sum(values) / len(values) for _, values in sorted(buckets.items())]))


def _report(throughput_intervals=(10.0, 12.0), latency_intervals=(3.0, 5.0)) -> BenchReport:
    return BenchReport(
        throughput_sessions_per_s=max(throughput_intervals),
        latency_ms=float(np.median(latency_intervals)),
        throughput_intervals=list(throughput_intervals),
        latency_intervals_ms=list(latency_intervals),
        busy_ratios={'admission': 0.1, 'classifier': 1.4, 'classifier[0]': 0.7, 'classifier[1]': 0.7},
        metadata=RunMetadata(classifier='knn', params={'neighbors_k': 1}, rate=100.0, seed=0),
    )


def test_uniform_rate_gives_that_rate():
    throughput, intervals = compute_throughput(_events(np.arange(901) * 0.1))
    assert throughput == pytest.approx(10.0)
    assert intervals == pytest.approx([10.0, 10.0, 10.0])


def test_the_busiest_interval_wins():
    slow = np.arange(150) * 0.2             # 5/s over [0, 30)
    fast = 30 + np.arange(601) * 0.05       # 20/s over [30, 60]
    throughput, intervals = compute_throughput(_events(np.concatenate([slow, fast])))
    assert throughput == pytest.approx(20.0)
    assert intervals == pytest.approx([5.0, 20.0])


def test_partial_intervals():
    # 15 s left over is kept and divided by 15 s
    _, intervals = compute_throughput(_events(np.arange(451) * 0.1))
    assert intervals == pytest.approx([10.0, 10.0])
    # 10 s left over is dropped
    _, intervals = compute_throughput(_events(np.arange(401) * 0.1))
    assert intervals == pytest.approx([10.0])


def test_a_single_insertion_is_not_a_throughput():
    with pytest.raises(EmptyInputError):
        compute_throughput(_events([0.0]))
    with pytest.raises(EmptyInputError):
        compute_throughput([TimelineEvent(1, 0)])


@pytest.mark.parametrize('latencies, expected', [([10, 20, 400], 20.0), ([10, 30], 20.0)])
def test_latency_is_the_median_of_interval_averages(latencies, expected):
    inserted_s = [5.0 + 10.0 * i for i in range(len(latencies))]
    latency, intervals = compute_latency(_events(inserted_s, latencies))
    assert latency == pytest.approx(expected)
    assert intervals == pytest.approx(latencies)


def test_latency_skips_empty_intervals():
    latency, intervals = compute_latency(_events([0.0, 1.0, 35.0], [2.0, 4.0, 9.0]))
    assert intervals == pytest.approx([3.0, 9.0])
    assert latency == pytest.approx(6.0)


def _check_against_naive(seed: int):
    rng = np.random.default_rng(seed)
    n_events = int(rng.integers(2, 600))
    inserted_s = rng.uniform(0, rng.uniform(1, 200), size=n_events)
    events = _events(inserted_s, rng.exponential(20.0, size=n_events))

    expected = _naive_throughput([e.inserted_at for e in events], 30 * NS)
    if expected is None:
        with pytest.raises(EmptyInputError):
            compute_throughput(events)
    else:
        assert compute_throughput(events)[0] == expected
    assert compute_latency(events)[0] == _naive_latency(events, 10 * NS)


@pytest.mark.parametrize('seed', range(N_ORACLE_TIMELINES))
def test_metrics_match_a_naive_computation(seed):
    _check_against_naive(seed)


@pytest.mark.slow
def test_metrics_match_a_naive_computation_over_many_timelines():
    for seed in range(N_ORACLE_TIMELINES_FULL):
        _check_against_naive(seed)


def test_metrics_ignore_order_and_clock_offset():
    rng = np.random.default_rng(9)
    inserted_s = rng.uniform(0, 120, size=500)
    latencies = rng.uniform(1, 50, size=500)
    events = _events(inserted_s, latencies)
    shuffled = [events[i] for i in rng.permutation(len(events))]
    shifted = _events(inserted_s, latencies, start_ns=10_000 * NS)

    for other in (shuffled, shifted):
        assert compute_throughput(other) == compute_throughput(events)
        assert compute_latency(other)[0] == pytest.approx(compute_latency(events)[0])


def test_run_length_check():
    check_run_length(10_000, 500.0)          # 20s
    check_run_length(10, None)               # unlimited runs are checked afterwards
    check_run_length(200, 2000.0, interval_s=0.001)
    with pytest.raises(ConfigError):
        check_run_length(10_000, 1000.0)     # 10s, the default interval needs 15s


def test_report_from_a_run_summary():
    summary = RunSummary(
        sessions_in=901,
        sessions_out=901,
        timelines=_events(np.arange(901) * 0.1),
        busy_ns={'admission': 9 * NS, 'classifier[0]': 45 * NS, 'classifier[1]': 45 * NS},
        wall_ns=90 * NS,
        classifier_worker_count=2,
    )
    report = BenchReport.from_summary(summary, RunMetadata(classifier='dt', rate=10.0))

    assert report.throughput_sessions_per_s == pytest.approx(10.0)
    assert report.latency_ms == pytest.approx(1.0)
    assert report.busy_ratios['classifier'] == pytest.approx(1.0)
    assert report.metadata.sessions == 901
    assert report.metadata.duration_s == pytest.approx(90.0)


def test_json_report_is_stable():
    report = _report()
    first, second = emit_report(report, 'json'), emit_report(report, 'json')
    assert first == second

    document = json.loads(first)
    assert list(document)[0] == 'schema_version'
    assert report_from_dict(document) == report


def test_csv_report_is_long_format():
    report = _report()
    table = pd.read_csv(io.StringIO(emit_report(report, 'csv').decode()))

    assert list(table.columns) == ['metric', 'interval_index', 'value']
    assert len(table) == 2 + 2 + len(report.busy_ratios)
    assert table['metric'].tolist()[:4] == ['throughput', 'throughput', 'latency_ms', 'latency_ms']
    assert table['metric'].tolist()[4:] == [f'busy_ratio.{stage}' for stage in sorted(report.busy_ratios)]


def test_unknown_report_format():
    with pytest.raises(ValueError):
        emit_report(_report(), 'xml')


def test_aggregate_over_runs():
    reports = [_report((10.0,), (3.0,)), _report((14.0,), (5.0,)), _report((12.0,), (4.0,))]
    aggregate = aggregate_reports(reports)

    assert aggregate.runs == 3
    assert (aggregate.throughput_sessions_per_s.min, aggregate.throughput_sessions_per_s.max) == (10.0, 14.0)
    assert aggregate.throughput_sessions_per_s.mean == pytest.approx(12.0)
    assert aggregate.latency_ms.mean == pytest.approx(4.0)

    suite = json.loads(emit_suite(reports))
    assert len(suite['runs']) == 3
    assert suite['aggregate']['runs'] == 3

    with pytest.raises(EmptyInputError):
        aggregate_reports([])


def test_saturation_is_the_last_rate_kept_up_with():
    results = [(100.0, 100.0), (200.0, 198.0), (400.0, 310.0), (800.0, 320.0)]
    assert find_saturation_rate(results) == 200.0
    assert find_saturation_rate([(100.0, 50.0)]) is None


def test_ramp_rates():
    assert ramp_rates(100, 400, 4) == [100.0, 200.0, 300.0, 400.0]
    with pytest.raises(ValueError):
        ramp_rates(0, 10, 3)


def test_recommendation_prefers_accuracy_among_fast_enough():
    candidates = [
        ClassifierCandidate('rf', f1=0.99, throughput_sessions_per_s=300.0),
        ClassifierCandidate('dt', f1=0.97, throughput_sessions_per_s=2_000.0),
        ClassifierCandidate('nb', f1=0.97, throughput_sessions_per_s=3_000.0),
        ClassifierCandidate('knn', f1=0.90, throughput_sessions_per_s=900.0),
    ]
    assert recommend_classifier(candidates, offered_rate=250.0).algorithm == 'rf'
    assert recommend_classifier(candidates, offered_rate=1_000.0).algorithm == 'nb'
    assert recommend_classifier(candidates, offered_rate=10_000.0) is None
