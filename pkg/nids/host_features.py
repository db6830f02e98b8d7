""" Host-based features over the last sessions to the same destination address. """
import collections
import logging
from typing import Deque, Dict, Iterable, Iterator, List, Sequence

import attr

from nids.types import SessionRecord

logger = logging.getLogger(__name__)

WINDOW_CAPACITY = 100


@attr.frozen
class HostFeatures:
    dst_host_count: int = 0                  # same destination and source address
    dst_host_same_src_port_count: int = 0    # ... and same source port
    dst_host_serror_count: int = 0           # ... of dst_host_count with a SYN error
    dst_host_srv_count: int = 0              # same destination and service
    dst_host_srv_serror_count: int = 0       # ... of dst_host_srv_count with a SYN error

    def __attrs_post_init__(self):
        if not (self.dst_host_same_src_port_count <= self.dst_host_count and
                self.dst_host_serror_count <= self.dst_host_count and
                self.dst_host_srv_serror_count <= self.dst_host_srv_count and
                min(self.as_tuple()) >= 0):
            raise ValueError(f"inconsistent host features {self}")

    def as_tuple(self):
        return attr.astuple(self)

    @classmethod
    def names(cls) -> List[str]:
        return [f.name for f in attr.fields(cls)]


@attr.frozen
class FullFeatureRecord:
    session: SessionRecord
    host: HostFeatures


@attr.frozen
class _WindowEntry:
    src_addr: str
    src_port: int
    service: str
    syn_error: bool

    @classmethod
    def of(cls, session: SessionRecord) -> '_WindowEntry':
        return cls(session.src_addr, session.five_tuple.src_port, session.service, session.is_syn_error)


def _count(entries: Iterable[_WindowEntry], session: SessionRecord) -> HostFeatures:
    host = same_port = serror = srv = srv_serror = 0
    src_port = session.five_tuple.src_port
    for entry in entries:
        if entry.src_addr == session.src_addr:
            host += 1
            same_port += entry.src_port == src_port
            serror += entry.syn_error
        if entry.service == session.service:
            srv += 1
            srv_serror += entry.syn_error
    return HostFeatures(host, same_port, serror, srv, srv_serror)


@attr.define
class HostWindowState:
    """ Single-writer: sessions must be presented in emission order.

    With include_current the session is appended before counting, so it counts itself.
    """
    capacity: int = WINDOW_CAPACITY
    include_current: bool = False
    windows: Dict[str, Deque[_WindowEntry]] = attr.Factory(dict)
    total_sessions: int = 0

    def update_and_extract(self, session: SessionRecord) -> HostFeatures:
        window = self.windows.get(session.dst_addr)
        if window is None:
            window = self.windows[session.dst_addr] = collections.deque(maxlen=self.capacity)

        entry = _WindowEntry.of(session)
        if self.include_current:
            window.append(entry)
            features = _count(window, session)
        else:
            features = _count(window, session)
            window.append(entry)

        self.total_sessions += 1
        return features

    def extract_all(self, sessions: Iterable[SessionRecord]) -> Iterator[FullFeatureRecord]:
        for session in sessions:
            yield FullFeatureRecord(session=session, host=self.update_and_extract(session))


def update_and_extract(window: HostWindowState, session: SessionRecord) -> HostFeatures:
    return window.update_and_extract(session)


def brute_force_host_features(
    sessions: Sequence[SessionRecord],
    capacity: int = WINDOW_CAPACITY,
    include_current: bool = False,
) -> List[HostFeatures]:
    """ Reference computation: for each session, scan all earlier sessions to the same destination. """
    result = []
    for i, session in enumerate(sessions):
        end = i + 1 if include_current else i
        same_dst = [_WindowEntry.of(s) for s in sessions[:end] if s.dst_addr == session.dst_addr]
        result.append(_count(same_dst[-capacity:], session))
    return result
