""" Records flowing through and out of the pipeline, and their JSONL forms. """
import json
import logging
from typing import Any, Dict, Iterable, Iterator, List, Optional, TextIO, Tuple

import attr

from nids.host_features import FullFeatureRecord, HostFeatures
from nids.types import ClassLabel, FiveTuple, Label, LabeledSession, SessionRecord
from utils.custom_types import MonotonicNs
from utils.serialization import dumps_json_line

logger = logging.getLogger(__name__)


@attr.define
class TimelineEvent:
    """ Monotonic ns stamps. Filled in stage by stage, so it is mutable until the sink. """
    session_id: int
    created_at: MonotonicNs
    encoded_at: Optional[MonotonicNs] = None
    classified_at: Optional[MonotonicNs] = None
    inserted_at: Optional[MonotonicNs] = None

    def is_complete(self) -> bool:
        return None not in (self.encoded_at, self.classified_at, self.inserted_at)

    def is_monotone(self) -> bool:
        return self.is_complete() and self.created_at <= self.encoded_at <= self.classified_at <= self.inserted_at

    @property
    def latency_ns(self) -> Optional[int]:
        return None if self.inserted_at is None else self.inserted_at - self.created_at


@attr.frozen
class SinkRecord:
    record: FullFeatureRecord
    label: ClassLabel
    score: float
    timeline: TimelineEvent
    classifier_error: bool = False

    @property
    def session_id(self) -> int:
        return self.record.session.session_id

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            **session_to_json_dict(self.record.session),
            **attr.asdict(self.record.host),
            'label': str(self.label.label),
            'score': self.score,
            'classifier_error': self.classifier_error,
            'created_at': self.timeline.created_at,
            'encoded_at': self.timeline.encoded_at,
            'classified_at': self.timeline.classified_at,
            'inserted_at': self.timeline.inserted_at,
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> 'SinkRecord':
        session = session_from_json_dict(data)
        host = HostFeatures(**{name: int(data[name]) for name in HostFeatures.names()})
        timeline = TimelineEvent(
            session_id=session.session_id,
            created_at=data['created_at'],
            encoded_at=data.get('encoded_at'),
            classified_at=data.get('classified_at'),
            inserted_at=data.get('inserted_at'),
        )
        return cls(
            record=FullFeatureRecord(session=session, host=host),
            label=ClassLabel(Label(data['label'])),
            score=float(data['score']),
            timeline=timeline,
            classifier_error=bool(data.get('classifier_error', False)),
        )


# ---------------------------------------------------------------------------------------------------------------------
# session log: one SessionRecord per line, basic feature names in snake_case

def session_to_json_dict(session: SessionRecord) -> Dict[str, Any]:
    ft = session.five_tuple
    return {
        'session_id': session.session_id,
        'timestamp_ms': session.timestamp_ms,
        'duration_s': session.duration_s,
        'src_addr': ft.src_addr,
        'src_port': ft.src_port,
        'dst_addr': ft.dst_addr,
        'dst_port': ft.dst_port,
        'protocol': str(ft.protocol),
        'service': str(session.service),
        'conn_state': str(session.conn_state),
        'direction': str(session.direction),
        'src_packets': session.src_packets,
        'src_bytes': session.src_bytes,
        'src_ip_bytes': session.src_ip_bytes,
        'dst_packets': session.dst_packets,
        'dst_bytes': session.dst_bytes,
        'dst_ip_bytes': session.dst_ip_bytes,
    }


def session_from_json_dict(data: Dict[str, Any]) -> SessionRecord:
    return SessionRecord(
        session_id=int(data['session_id']),
        timestamp_ms=int(data['timestamp_ms']),
        duration_s=float(data['duration_s']),
        five_tuple=FiveTuple(
            str(data['src_addr']), int(data['src_port']), str(data['dst_addr']), int(data['dst_port']),
            data['protocol'],
        ),
        service=str(data['service']),
        conn_state=data['conn_state'],
        direction=data['direction'],
        src_packets=int(data['src_packets']),
        src_bytes=int(data['src_bytes']),
        src_ip_bytes=int(data['src_ip_bytes']),
        dst_packets=int(data['dst_packets']),
        dst_bytes=int(data['dst_bytes']),
        dst_ip_bytes=int(data['dst_ip_bytes']),
    )


def labeled_session_to_json_dict(item: LabeledSession) -> Dict[str, Any]:
    data = session_to_json_dict(item.session)
    if item.label_or_none is not None:
        data['label'] = str(item.label_or_none.label)
        if item.label_or_none.attack_category is not None:
            data['attack_cat'] = item.label_or_none.attack_category
    return data


def labeled_session_from_json_dict(data: Dict[str, Any]) -> LabeledSession:
    label_or_none = None
    if data.get('label') is not None:
        label_or_none = ClassLabel(Label(data['label']), data.get('attack_cat'))
    return LabeledSession(session=session_from_json_dict(data), label_or_none=label_or_none)


def write_session_log(sessions: Iterable[SessionRecord | LabeledSession], stream: TextIO) -> int:
    count = 0
    for item in sessions:
        if isinstance(item, LabeledSession):
            stream.write(dumps_json_line(labeled_session_to_json_dict(item)))
        else:
            stream.write(dumps_json_line(session_to_json_dict(item)))
        count += 1
    return count


def iter_session_log(lines: Iterable[str]) -> Iterator[LabeledSession]:
    """ Labels are optional per line. Malformed lines are skipped with a warning. """
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield labeled_session_from_json_dict(json.loads(line))
        except (KeyError, TypeError, ValueError) as e:
            logger.warning(f"session log entry {line_no} skipped: {e}")


def read_session_log(stream: TextIO) -> List[LabeledSession]:
    return list(iter_session_log(stream))


def split_labels(items: Iterable[LabeledSession]) -> Tuple[List[SessionRecord], List[Optional[ClassLabel]]]:
    sessions, labels = [], []
    for item in items:
        sessions.append(item.session)
        labels.append(item.label_or_none)
    return sessions, labels
