""" Where classified sessions end up. A sink has a single writer, the pipeline's sink stage. """
import abc
import logging
import os
import threading
from typing import Dict, List, Optional

from nids.config import SinkKind
from nids.pipeline.records import SinkRecord
from nids.types import Label
from utils.file_utils import fresh_file_path
from utils.serialization import dumps_json_line

logger = logging.getLogger(__name__)


class Sink(abc.ABC):
    @abc.abstractmethod
    def write(self, record: SinkRecord):
        """ Persist one record; raise on failure, the caller retries. """

    @abc.abstractmethod
    def count(self) -> int:
        ...

    def close(self):
        pass

    def __enter__(self) -> 'Sink':
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False


class NullSink(Sink):
    def __init__(self):
        self._count = 0

    def write(self, record: SinkRecord):
        self._count += 1

    def count(self) -> int:
        return self._count


class JsonlSink(Sink):
    """ One JSON object per line. Never appends to an earlier run's file: an existing path gets a .N suffix. """

    def __init__(self, path: str):
        self.path = fresh_file_path(path)
        self._file = open(self.path, 'w')
        self._count = 0
        logger.info(f"writing sink records to {self.path}")

    def write(self, record: SinkRecord):
        self._file.write(dumps_json_line(record.to_json_dict()))
        self._count += 1

    def count(self) -> int:
        return self._count

    def close(self):
        if not self._file.closed:
            self._file.close()


class EmbeddedStoreSink(Sink):
    """ In-memory document store indexed by session id. Every write is kept: sessions replayed
    more than once (e.g. bench runs over a session log with repeated ids) store one record per write. """

    def __init__(self):
        self._records: Dict[int, List[SinkRecord]] = {}
        self._count = 0
        self._lock = threading.Lock()

    def write(self, record: SinkRecord):
        with self._lock:
            self._records.setdefault(record.session_id, []).append(record)
            self._count += 1

    def count(self) -> int:
        with self._lock:
            return self._count

    def get(self, session_id: int) -> Optional[SinkRecord]:
        """ Latest record written for the session. """
        with self._lock:
            records = self._records.get(session_id)
            return records[-1] if records else None

    def get_all(self, session_id: int) -> List[SinkRecord]:
        with self._lock:
            return list(self._records.get(session_id, []))

    def query(self, label: Optional[Label] = None, min_score: Optional[float] = None) -> List[SinkRecord]:
        """ Sorted by session id, repeated ids in write order. """
        with self._lock:
            records = [r for per_session in self._records.values() for r in per_session]
        if label is not None:
            records = [r for r in records if r.label.label is Label(label)]
        if min_score is not None:
            records = [r for r in records if r.score >= min_score]
        return sorted(records, key=lambda r: r.session_id)

    def all(self) -> List[SinkRecord]:
        return self.query()


def make_sink(kind: SinkKind, path_or_none: Optional[str] = None, run_dir_or_none: Optional[str] = None) -> Sink:
    match SinkKind(kind):
        case SinkKind.NULL:
            return NullSink()
        case SinkKind.EMBEDDED:
            return EmbeddedStoreSink()
        case SinkKind.JSONL:
            path = path_or_none or os.path.join(run_dir_or_none or '.', 'sink.jsonl')
            return JsonlSink(path)
