import io
import json
import threading

import attr
import pytest

from nids.classifiers import Algorithm, Dataset, KNNParams, NullModel, predict, train
from nids.config import RunConfig
from nids.errors import InvariantViolation, SpecVersionMismatchError
from nids.host_features import HostWindowState
from nids.normalization import encode_all, fit_normalization, strip_and_encode
from nids.pipeline import (
    EmbeddedStoreSink, JsonlSink, NullSink, SinkRecord, TokenBucket, read_session_log, replay, run_pipeline,
    stage_busy_ratio, write_session_log,
)
from nids.tests.factories import random_sessions
from nids.types import SYN_ERROR_STATES, ClassLabel, Label, LabeledSession

N_SESSIONS = 400


def _get_test_setup(n_sessions: int = N_SESSIONS):
    """ kNN trained to flag SYN errors, and a fresh stream to run it on. """
    training = list(HostWindowState().extract_all(random_sessions(300, seed=20)))
    spec = fit_normalization(training)
    labels = [int(record.session.conn_state in SYN_ERROR_STATES) for record in training]
    model = train(Algorithm.KNN, Dataset.build(encode_all(training, spec), labels, spec.spec_version), KNNParams(3))
    return model, spec, random_sessions(n_sessions, seed=21)


def _config(**pipeline_overrides) -> RunConfig:
    overrides = {f'pipeline.{key}': value for key, value in pipeline_overrides.items()}
    return RunConfig.from_defaults().with_overrides(**{'pipeline.sink_kind': 'embedded', **overrides})


@attr.define(eq=False)
class _ExplodingModel(NullModel):
    def scores(self, X):
        raise RuntimeError("model fell over")


class _FlakySink(EmbeddedStoreSink):
    """ Fails the first `failures` writes of each listed session, or every write when failures is None. """

    def __init__(self, session_ids, failures=None):
        super().__init__()
        self.session_ids = set(session_ids)
        self.failures = failures
        self.attempts = {}
        self._attempts_lock = threading.Lock()

    def write(self, record: SinkRecord):
        with self._attempts_lock:
            attempt = self.attempts[record.session_id] = self.attempts.get(record.session_id, 0) + 1
        if record.session_id in self.session_ids and (self.failures is None or attempt <= self.failures):
            raise IOError(f"write {attempt} of session {record.session_id} refused")
        super().write(record)


@pytest.mark.parametrize('classifiers, codecs, capacity', [(1, 1, 1), (2, 1, 4), (4, 3, 2), (3, 2, 10_000)])
def test_every_session_comes_out_once(classifiers, codecs, capacity):
    model, spec, sessions = _get_test_setup()
    config = _config(classifier_worker_count=classifiers, codec_worker_count=codecs, queue_capacity=capacity)
    sink = EmbeddedStoreSink()

    summary = run_pipeline(config, sessions, model, spec, sink=sink)

    assert summary.sessions_in == summary.sessions_out == len(sessions)
    assert summary.dropped == 0
    assert sink.count() == len(sessions)
    assert [r.session_id for r in sink.all()] == [s.session_id for s in sessions]


def test_results_match_a_serial_run():
    model, spec, sessions = _get_test_setup()
    sink = EmbeddedStoreSink()
    run_pipeline(_config(classifier_worker_count=4, codec_worker_count=2, queue_capacity=3), sessions, model, spec, sink=sink)

    for expected in HostWindowState().extract_all(sessions):
        written = sink.get(expected.session.session_id)
        assert written.record == expected
        label, score = predict(model, strip_and_encode(expected, spec))
        assert (written.label, written.score) == (label, score)


def test_timelines_are_complete_and_ordered():
    model, spec, sessions = _get_test_setup()
    summary = run_pipeline(_config(classifier_worker_count=3), sessions, model, spec, sink=NullSink())

    assert len(summary.timelines) == len(sessions)
    assert all(timeline.is_monotone() for timeline in summary.timelines)
    assert all(timeline.latency_ns >= 0 for timeline in summary.timelines)


@pytest.mark.parametrize('fail_open, label, score', [(True, Label.NORMAL, 0.0), (False, Label.ABNORMAL, 1.0)])
def test_classifier_errors_fail_open_or_closed(fail_open, label, score):
    model, spec, sessions = _get_test_setup(50)
    exploding = _ExplodingModel(metadata=model.metadata)
    sink = EmbeddedStoreSink()

    summary = run_pipeline(_config(fail_open=fail_open), sessions, exploding, spec, sink=sink)

    assert sorted(summary.classifier_errors) == [s.session_id for s in sessions]
    assert summary.sessions_out == len(sessions)
    assert all(r.classifier_error and r.label.label is label and r.score == score for r in sink.all())


def test_sink_writes_are_retried():
    model, spec, sessions = _get_test_setup(60)
    flaky_ids = [s.session_id for s in sessions[::10]]
    sink = _FlakySink(flaky_ids, failures=2)

    summary = run_pipeline(_config(sink_retries=3), sessions, model, spec, sink=sink)

    assert summary.sink_errors == []
    assert sink.count() == len(sessions)
    assert all(sink.attempts[i] == 3 for i in flaky_ids)


def test_exhausted_retries_drop_the_session_and_still_reconcile():
    model, spec, sessions = _get_test_setup(60)
    lost = sessions[7].session_id
    sink = _FlakySink([lost])

    summary = run_pipeline(_config(sink_retries=2), sessions, model, spec, sink=sink)

    assert summary.sink_errors == [lost]
    assert summary.sessions_out == len(sessions) - 1
    assert summary.reconciles()
    assert sink.attempts[lost] == 3
    assert sink.get(lost) is None


def test_model_from_another_spec_is_refused():
    model, spec, sessions = _get_test_setup(10)
    stale = _ExplodingModel(metadata=attr.evolve(model.metadata, spec_version='v1-000000000000'))
    with pytest.raises(SpecVersionMismatchError):
        run_pipeline(_config(), sessions, stale, spec, sink=NullSink())


def test_failing_source_aborts_the_run():
    model, spec, sessions = _get_test_setup(30)

    def source():
        yield from sessions[:10]
        raise OSError("capture device went away")

    with pytest.raises(InvariantViolation):
        run_pipeline(_config(queue_capacity=2), source(), model, spec, sink=NullSink())


def test_jsonl_sink_never_appends(tmp_path):
    model, spec, sessions = _get_test_setup(20)
    config = _config(sink_kind='jsonl', sink_path=str(tmp_path / 'sink.jsonl'))

    run_pipeline(config, sessions, model, spec)
    run_pipeline(config, sessions, model, spec)

    first, second = tmp_path / 'sink.jsonl', tmp_path / 'sink.1.jsonl'
    assert len(first.read_text().splitlines()) == len(sessions)
    assert len(second.read_text().splitlines()) == len(sessions)


def test_jsonl_sink_records_read_back(tmp_path):
    model, spec, sessions = _get_test_setup(20)
    sink = JsonlSink(str(tmp_path / 'out.jsonl'))
    with sink:
        run_pipeline(_config(), sessions, model, spec, sink=sink)

    lines = (tmp_path / 'out.jsonl').read_text().splitlines()
    records = [SinkRecord.from_json_dict(json.loads(line)) for line in lines]
    assert sorted(r.session_id for r in records) == [s.session_id for s in sessions]
    assert all(r.timeline.is_monotone() for r in records)


def test_embedded_store_queries():
    model, spec, sessions = _get_test_setup()
    sink = EmbeddedStoreSink()
    run_pipeline(_config(), sessions, model, spec, sink=sink)

    abnormal = sink.query(label=Label.ABNORMAL)
    normal = sink.query(label='normal')
    assert len(abnormal) + len(normal) == len(sessions)
    assert all(r.score > 0.5 for r in abnormal)
    assert sink.query(min_score=0.5) == sorted(
        [r for r in sink.all() if r.score >= 0.5], key=lambda r: r.session_id
    )


def test_embedded_store_keeps_repeated_session_ids():
    model, spec, sessions = _get_test_setup(60)
    # the same log replayed twice back to back: every id shows up twice
    repeated = sessions + [attr.evolve(s, timestamp_ms=s.timestamp_ms + 10_000) for s in sessions]
    sink = EmbeddedStoreSink()

    summary = run_pipeline(_config(classifier_worker_count=2), repeated, model, spec, sink=sink)

    assert summary.sessions_out == len(repeated)
    assert sink.count() == summary.sessions_out
    assert len(sink.all()) == len(repeated)
    assert all(len(sink.get_all(s.session_id)) == 2 for s in sessions)


def test_busy_ratios_are_bounded():
    model, spec, sessions = _get_test_setup()
    summary = run_pipeline(_config(classifier_worker_count=3, codec_worker_count=2), sessions, model, spec, sink=NullSink())
    ratios = stage_busy_ratio(summary)

    assert {'admission', 'features', 'sink', 'codec', 'classifier', 'classifier[2]', 'codec[1]'} <= set(ratios)
    for name, ratio in ratios.items():
        limit = {'codec': 2, 'classifier': 3}.get(name, 1)
        assert 0.0 <= ratio <= limit


def test_replay_rate_paces_admission():
    model, spec, sessions = _get_test_setup(20)
    summary = run_pipeline(_config(replay_rate=200.0), sessions, model, spec, sink=NullSink())
    # the bucket starts empty, so 20 sessions at 200/s take at least 0.1s
    assert summary.wall_ns >= 0.09e9


def test_token_bucket_with_a_fake_clock():
    now = [0.0]
    slept = []

    def sleep(seconds):
        slept.append(seconds)
        now[0] += seconds

    bucket = TokenBucket(rate=10.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(5):
        bucket.take()

    assert sum(slept) == pytest.approx(0.5)
    assert list(replay(range(3), None)) == [0, 1, 2]
    with pytest.raises(ValueError):
        TokenBucket(rate=0.0)


def test_session_log_keeps_labels():
    sessions = random_sessions(5, seed=22)
    items = [
        LabeledSession(sessions[0], ClassLabel(Label.ABNORMAL, 'DoS')),
        LabeledSession(sessions[1], ClassLabel(Label.NORMAL)),
        LabeledSession(sessions[2]),
        *sessions[3:],
    ]
    text = io.StringIO()
    assert write_session_log(items, text) == 5
    text.seek(0)

    read_back = read_session_log(text)
    assert [item.session for item in read_back] == sessions
    assert read_back[0].label_or_none == ClassLabel(Label.ABNORMAL, 'DoS')
    assert read_back[1].label_or_none == ClassLabel(Label.NORMAL)
    assert read_back[2].label_or_none is None and read_back[4].label_or_none is None


def test_summary_dict_reports_sink_failures():
    model, spec, sessions = _get_test_setup(20)
    summary = run_pipeline(_config(), sessions, model, spec, sink=_FlakySink([sessions[0].session_id]))
    data = summary.to_dict()
    assert data['sink_errors'] == 1
    assert data['sink_error_session_ids'] == [sessions[0].session_id]
    assert data['sessions_in'] == 20 and data['sessions_out'] == 19
