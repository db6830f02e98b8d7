""" The staged streaming pipeline.

    source -> admission -> host features (1 thread) -> codec (K threads) -> classifiers (N threads) -> sink (1 thread)

Stages are connected by bounded queues; a full queue blocks its producer, nothing is
ever dropped. Each thread owns a BusyClock that only runs while a record is processed,
so time spent blocked on a queue or sleeping in the replay throttle is idle time.
"""
import logging
import queue
import threading
import time
from typing import Callable, Dict, Iterable, List, Optional

import attr
from tqdm import tqdm

from nids.classifiers.models import TrainedModel, predict
from nids.codec import DEFAULT_SCHEMA, CodecSchema, decode_record, encode_record
from nids.config import RunConfig
from nids.errors import CodecError, InvariantViolation, SpecVersionMismatchError
from nids.host_features import FullFeatureRecord, HostWindowState
from nids.normalization import NormalizationSpec, strip_and_encode
from nids.pipeline.records import SinkRecord, TimelineEvent
from nids.pipeline.replay import replay
from nids.pipeline.sinks import Sink, make_sink
from nids.types import ClassLabel, Label, SessionRecord
from utils.profiling import BusyClock

logger = logging.getLogger(__name__)

ADMISSION = 'admission'
FEATURES = 'features'
CODEC = 'codec'
CLASSIFIER = 'classifier'
SINK = 'sink'

_STOP = object()


@attr.define
class _Envelope:
    session: SessionRecord
    timeline: TimelineEvent
    record: Optional[FullFeatureRecord] = None
    payload: Optional[bytes] = None
    label: Optional[ClassLabel] = None
    score: float = 0.0
    classifier_error: bool = False


@attr.define
class RunSummary:
    sessions_in: int = 0
    sessions_out: int = 0
    classifier_errors: List[int] = attr.Factory(list)     # session ids, still written to the sink
    codec_errors: List[int] = attr.Factory(list)
    sink_errors: List[int] = attr.Factory(list)
    timelines: List[TimelineEvent] = attr.Factory(list)
    busy_ns: Dict[str, int] = attr.Factory(dict)
    wall_ns: int = 0
    classifier_worker_count: int = 1
    codec_worker_count: int = 1

    @property
    def dropped(self) -> int:
        return len(self.codec_errors) + len(self.sink_errors)

    def reconciles(self) -> bool:
        return self.sessions_in == self.sessions_out + self.dropped

    def to_dict(self) -> Dict:
        return {
            'sessions_in': self.sessions_in,
            'sessions_out': self.sessions_out,
            'classifier_errors': len(self.classifier_errors),
            'codec_errors': len(self.codec_errors),
            'sink_errors': len(self.sink_errors),
            'sink_error_session_ids': list(self.sink_errors),
            'wall_s': self.wall_ns / 1e9,
            'busy_ratio': stage_busy_ratio(self),
        }


def worker_stage_name(stage: str, index: int) -> str:
    return f"{stage}[{index}]"


def stage_busy_ratio(summary: RunSummary) -> Dict[str, float]:
    """ Busy time over wall time per thread, plus the summed ratio of each worker pool.

    A pool's sum can reach its worker count.
    """
    if summary.wall_ns <= 0:
        return {name: 0.0 for name in summary.busy_ns}
    ratios = {name: busy / summary.wall_ns for name, busy in summary.busy_ns.items()}
    for pool in (CODEC, CLASSIFIER):
        members = [ratio for name, ratio in ratios.items() if name.startswith(pool + '[')]
        if members:
            ratios[pool] = sum(members)
    return ratios


class _Countdown:
    """ The last of `n` workers to finish runs `on_zero`. """

    def __init__(self, n: int, on_zero: Callable[[], None]):
        self._n = n
        self._on_zero = on_zero
        self._lock = threading.Lock()

    def done(self):
        with self._lock:
            self._n -= 1
            last = self._n == 0
        if last:
            self._on_zero()


class _Pipeline:
    def __init__(
        self,
        config: RunConfig,
        model: TrainedModel,
        spec: NormalizationSpec,
        sink: Sink,
        schema: CodecSchema,
        verbose: bool,
    ):
        self.pipeline_config = config.pipeline
        self.model = model
        self.spec = spec
        self.sink = sink
        self.schema = schema
        self.verbose = verbose
        self.window = HostWindowState(include_current=config.include_current_session)

        capacity = config.pipeline.queue_capacity
        self.admitted: queue.Queue = queue.Queue(maxsize=capacity)
        self.featured: queue.Queue = queue.Queue(maxsize=capacity)
        self.decoded: queue.Queue = queue.Queue(maxsize=capacity)
        self.classified: queue.Queue = queue.Queue(maxsize=capacity)

        self.summary = RunSummary(
            classifier_worker_count=config.pipeline.classifier_worker_count,
            codec_worker_count=config.pipeline.codec_worker_count,
        )
        self.clocks: Dict[str, BusyClock] = {}
        self.failures: List[BaseException] = []
        self.abort = threading.Event()
        self._lock = threading.Lock()

    def _clock(self, name: str) -> BusyClock:
        clock = self.clocks[name] = BusyClock()
        return clock

    def _fail(self, stage: str, e: BaseException):
        logger.exception(f"{stage} stage failed")
        with self._lock:
            self.failures.append(e)
        self.abort.set()

    @staticmethod
    def _drain(q: queue.Queue):
        """ Keep consuming after a failure so upstream stages never block on us. """
        while q.get() is not _STOP:
            pass

    # -----------------------------------------------------------------------------------------------------------------
    # stages

    def admit(self, source: Iterable[SessionRecord]):
        clock = self._clock(ADMISSION)
        try:
            for session in replay(source, self.pipeline_config.get_rate_or_none()):
                if self.abort.is_set():
                    break
                with clock:
                    envelope = _Envelope(session, TimelineEvent(session.session_id, time.monotonic_ns()))
                self.admitted.put(envelope)
                self.summary.sessions_in += 1
        except BaseException as e:
            self._fail(ADMISSION, e)
        finally:
            self.admitted.put(_STOP)

    def extract_features(self):
        clock = self._clock(FEATURES)
        try:
            while (envelope := self.admitted.get()) is not _STOP:
                with clock:
                    envelope.record = FullFeatureRecord(envelope.session, self.window.update_and_extract(envelope.session))
                self.featured.put(envelope)
        except BaseException as e:
            self._fail(FEATURES, e)
            self._drain(self.admitted)
        finally:
            for _ in range(self.pipeline_config.codec_worker_count):
                self.featured.put(_STOP)

    def convert(self, index: int, countdown: _Countdown):
        clock = self._clock(worker_stage_name(CODEC, index))
        try:
            while (envelope := self.featured.get()) is not _STOP:
                with clock:
                    try:
                        envelope.payload = encode_record(envelope.record, self.schema)
                        envelope.record = decode_record(envelope.payload, self.schema)
                    except CodecError as e:
                        logger.warning(f"session {envelope.session.session_id} lost at the codec boundary: {e}")
                        with self._lock:
                            self.summary.codec_errors.append(envelope.session.session_id)
                        continue
                    envelope.payload = None
                    envelope.timeline.encoded_at = time.monotonic_ns()
                self.decoded.put(envelope)
        except BaseException as e:
            self._fail(CODEC, e)
            self._drain(self.featured)
        finally:
            countdown.done()

    def classify(self, index: int, countdown: _Countdown):
        clock = self._clock(worker_stage_name(CLASSIFIER, index))
        try:
            while (envelope := self.decoded.get()) is not _STOP:
                with clock:
                    self._classify_one(envelope)
                    envelope.timeline.classified_at = time.monotonic_ns()
                self.classified.put(envelope)
        except BaseException as e:
            self._fail(CLASSIFIER, e)
            self._drain(self.decoded)
        finally:
            countdown.done()

    def _classify_one(self, envelope: _Envelope):
        try:
            vector = strip_and_encode(envelope.record, self.spec)
            envelope.label, envelope.score = predict(self.model, vector)
        except Exception as e:
            logger.warning(f"classifier failed on session {envelope.session.session_id}: {e!r}")
            envelope.classifier_error = True
            if self.pipeline_config.fail_open:
                envelope.label, envelope.score = ClassLabel(Label.NORMAL), 0.0
            else:
                envelope.label, envelope.score = ClassLabel(Label.ABNORMAL), 1.0
            with self._lock:
                self.summary.classifier_errors.append(envelope.session.session_id)

    def write(self):
        clock = self._clock(SINK)
        progress = tqdm(desc='sink', unit='session', disable=not self.verbose)
        try:
            while (envelope := self.classified.get()) is not _STOP:
                with clock:
                    if self._write_one(envelope):
                        self.summary.sessions_out += 1
                        self.summary.timelines.append(envelope.timeline)
                    else:
                        self.summary.sink_errors.append(envelope.session.session_id)
                progress.update()
        except BaseException as e:
            self._fail(SINK, e)
            self._drain(self.classified)
        finally:
            progress.close()

    def _write_one(self, envelope: _Envelope) -> bool:
        attempts = 1 + self.pipeline_config.sink_retries
        for attempt in range(1, attempts + 1):
            envelope.timeline.inserted_at = time.monotonic_ns()
            record = SinkRecord(
                record=envelope.record,
                label=envelope.label,
                score=envelope.score,
                timeline=envelope.timeline,
                classifier_error=envelope.classifier_error,
            )
            try:
                self.sink.write(record)
                return True
            except Exception as e:
                logger.warning(f"sink write {attempt}/{attempts} failed for session {envelope.session.session_id}: {e!r}")
        envelope.timeline.inserted_at = None
        return False

    # -----------------------------------------------------------------------------------------------------------------

    def run(self, source: Iterable[SessionRecord]) -> RunSummary:
        pipeline_config = self.pipeline_config
        to_sink = _Countdown(pipeline_config.classifier_worker_count, lambda: self.classified.put(_STOP))
        to_classifiers = _Countdown(
            pipeline_config.codec_worker_count,
            lambda: [self.decoded.put(_STOP) for _ in range(pipeline_config.classifier_worker_count)],
        )

        threads = [
            threading.Thread(target=self.admit, args=(source,), name=ADMISSION),
            threading.Thread(target=self.extract_features, name=FEATURES),
            *(threading.Thread(target=self.convert, args=(i, to_classifiers), name=worker_stage_name(CODEC, i))
              for i in range(pipeline_config.codec_worker_count)),
            *(threading.Thread(target=self.classify, args=(i, to_sink), name=worker_stage_name(CLASSIFIER, i))
              for i in range(pipeline_config.classifier_worker_count)),
            threading.Thread(target=self.write, name=SINK),
        ]

        started_at = time.monotonic_ns()
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        self.summary.wall_ns = time.monotonic_ns() - started_at
        self.summary.busy_ns = {name: clock.busy_ns for name, clock in self.clocks.items()}

        if self.failures:
            raise InvariantViolation(f"pipeline stage failed: {self.failures[0]!r}") from self.failures[0]
        if not self.summary.reconciles():
            raise InvariantViolation(
                f"{self.summary.sessions_in} sessions in, {self.summary.sessions_out} out, "
                f"{self.summary.dropped} dropped"
            )
        return self.summary


def run_pipeline(
    config: RunConfig,
    source: Iterable[SessionRecord],
    model: TrainedModel,
    spec: NormalizationSpec,
    sink: Optional[Sink] = None,
    schema: CodecSchema = DEFAULT_SCHEMA,
    verbose: bool = False,
) -> RunSummary:
    """ Streams `source` through the stage graph. The sink is closed on return only if it was made here. """
    if model.metadata.spec_version != spec.spec_version:
        raise SpecVersionMismatchError(model.metadata.spec_version, spec.spec_version)

    own_sink = sink is None
    if own_sink:
        sink = make_sink(config.pipeline.sink_kind, config.pipeline.sink_path)

    try:
        summary = _Pipeline(config, model, spec, sink, schema, verbose).run(source)
    finally:
        if own_sink:
            sink.close()

    logger.info(
        f"pipeline done: {summary.sessions_in} in, {summary.sessions_out} out, "
        f"{len(summary.classifier_errors)} classifier errors, {summary.dropped} dropped, "
        f"{summary.wall_ns / 1e9:.3f}s"
    )
    return summary
