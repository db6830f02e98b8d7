""" Labels sessions from a UNSW-NB15 shaped ground-truth table.

    src,sport,dst,dport,proto,start_time,end_time,attack_cat

Times are epoch seconds, or ISO timestamps taken as UTC. A session is ABNORMAL when its 5-tuple matches a row in either
orientation and [start, start + duration] overlaps [start_time - 1 s, end_time + 1 s],
both ends inclusive.
"""
import collections
import logging
from typing import DefaultDict, Iterable, Iterator, List, Optional, TextIO, Tuple, Union

import attr
import pandas as pd

from nids.errors import GroundTruthFormatError
from nids.types import ClassLabel, FiveTuple, LabeledSession, Protocol, SessionRecord
from utils.date_utils import parse_epoch_seconds
from utils.enum_utils import parse_enum

logger = logging.getLogger(__name__)

GROUND_TRUTH_COLUMNS = ('src', 'sport', 'dst', 'dport', 'proto', 'start_time', 'end_time', 'attack_cat')
MATCH_TOLERANCE_S = 1.0

_Key = Tuple[Protocol, Tuple[str, int], Tuple[str, int]]


def _canonical_key(five_tuple: FiveTuple) -> _Key:
    a = (five_tuple.src_addr, five_tuple.src_port)
    b = (five_tuple.dst_addr, five_tuple.dst_port)
    return (five_tuple.protocol,) + ((a, b) if a <= b else (b, a))


@attr.frozen
class AttackInterval:
    start_s: float
    end_s: float
    attack_category: Optional[str]

    def overlaps(self, start_s: float, end_s: float, tolerance_s: float = MATCH_TOLERANCE_S) -> bool:
        return start_s <= self.end_s + tolerance_s and end_s >= self.start_s - tolerance_s


@attr.define
class LabelingStats:
    rows_loaded: int = 0
    rows_skipped: int = 0
    sessions: int = 0
    sessions_matched: int = 0


@attr.define
class GroundTruth:
    intervals: DefaultDict[_Key, List[AttackInterval]] = attr.Factory(lambda: collections.defaultdict(list))
    stats: LabelingStats = attr.Factory(LabelingStats)
    tolerance_s: float = MATCH_TOLERANCE_S

    @classmethod
    def from_csv(cls, path_or_stream: Union[str, TextIO], tolerance_s: float = MATCH_TOLERANCE_S) -> 'GroundTruth':
        truth = cls(tolerance_s=tolerance_s)

        def skip_bad_line(fields: List[str]) -> None:
            truth.stats.rows_skipped += 1
            logger.debug(f"ground truth line with {len(fields)} fields skipped")
            return None

        table = pd.read_csv(
            path_or_stream, dtype=str, keep_default_na=False, skipinitialspace=True,
            engine='python', on_bad_lines=skip_bad_line,
        ).fillna('')
        table.columns = [str(c).strip().lower() for c in table.columns]
        if missing := [c for c in GROUND_TRUTH_COLUMNS if c not in table.columns]:
            raise GroundTruthFormatError(f"ground truth is missing columns {missing}")

        for row_no, row in enumerate(table[list(GROUND_TRUTH_COLUMNS)].itertuples(index=False), start=2):
            try:
                truth.add_row(*row)
            except (TypeError, ValueError) as e:
                truth.stats.rows_skipped += 1
                logger.debug(f"ground truth row {row_no} skipped: {e}")

        logger.info(f"loaded {truth.stats.rows_loaded} ground truth rows, skipped {truth.stats.rows_skipped}")
        return truth

    def add_row(self, src, sport, dst, dport, proto, start_time, end_time, attack_cat):
        protocol = parse_enum(Protocol, str(proto))
        ports = (0, 0) if protocol is Protocol.ICMP else (_port(sport), _port(dport))
        five_tuple = FiveTuple(str(src).strip(), ports[0], str(dst).strip(), ports[1], protocol)
        start_s, end_s = parse_epoch_seconds(str(start_time)), parse_epoch_seconds(str(end_time))
        if not start_s <= end_s:
            raise ValueError(f"start_time {start_s} after end_time {end_s}")

        category = str(attack_cat).strip() or None
        self.intervals[_canonical_key(five_tuple)].append(AttackInterval(start_s, end_s, category))
        self.stats.rows_loaded += 1

    def match(self, session: SessionRecord) -> Optional[AttackInterval]:
        start_s = session.timestamp_ms / 1000.0
        end_s = start_s + session.duration_s
        for interval in self.intervals.get(_canonical_key(session.five_tuple), ()):
            if interval.overlaps(start_s, end_s, self.tolerance_s):
                return interval
        return None

    def label(self, session: SessionRecord) -> ClassLabel:
        self.stats.sessions += 1
        interval = self.match(session)
        if interval is None:
            return ClassLabel.normal()
        self.stats.sessions_matched += 1
        return ClassLabel.abnormal(interval.attack_category)

    def label_all(self, sessions: Iterable[SessionRecord]) -> Iterator[LabeledSession]:
        for session in sessions:
            yield LabeledSession(session=session, label_or_none=self.label(session))


def _port(raw) -> int:
    """ UNSW-NB15 writes some ports in hex, e.g. 0x000b """
    text = str(raw).strip().lower()
    return int(text, 16) if text.startswith('0x') else int(float(text))
