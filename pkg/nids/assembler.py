""" Groups packets into bidirectional sessions and emits SessionRecords with the basic features.

The state table is single-writer: one thread calls advance() / flush_all().

Records leave the assembler in nondecreasing start-time order. A finished session is held
back while some still-open flow started earlier than it, so long-lived flows delay the
release of the short ones that started after them.

The hold-back is bounded by max_pending_sessions. Past it the oldest finished sessions are
released anyway and counted in AssemblyStats.sessions_forced; the open flows that started
before them will come out of order when they end.
"""
import collections
import heapq
import logging
from typing import Counter, Dict, Iterable, List, Optional, Tuple

import attr

from nids.capture import PacketEvent, TcpFlag
from nids.config import AssemblerConfig
from nids.services import LocalPrefixes, ServiceMap, direction_of, service_of
from nids.types import ConnState, FiveTuple, Protocol, SessionRecord
from utils.custom_types import Endpoint, EpochUs
from utils.enum_utils import StrEnum

logger = logging.getLogger(__name__)


class TerminationReason(StrEnum):
    FIN = 'fin'
    RST = 'rst'
    TIMEOUT = 'timeout'
    EOF = 'eof'


@attr.frozen
class FlowKey:
    """ Both directions of a session map to the same key. """
    low: Endpoint
    high: Endpoint
    protocol: Protocol
    fragment: bool = False

    @classmethod
    def from_five_tuple(cls, five_tuple: FiveTuple, fragment: bool = False) -> 'FlowKey':
        a = (five_tuple.src_addr, five_tuple.src_port)
        b = (five_tuple.dst_addr, five_tuple.dst_port)
        low, high = (a, b) if a <= b else (b, a)
        return cls(low=low, high=high, protocol=five_tuple.protocol, fragment=fragment)


@attr.define
class DirectionCounters:
    packets: int = 0
    bytes: int = 0
    ip_bytes: int = 0

    def add(self, packet: PacketEvent):
        self.packets += 1
        self.bytes += packet.payload_len
        self.ip_bytes += packet.wire_len


@attr.define
class TcpHistory:
    """ Simplified Zeek-compatible connection state over the flags seen in each direction. """
    orig_syn: bool = False
    resp_syn_ack: bool = False
    orig_fin: bool = False
    resp_fin: bool = False
    orig_rst: bool = False
    resp_rst: bool = False
    first_rst_by_orig_or_none: Optional[bool] = None
    last_fin_by_orig_or_none: Optional[bool] = None
    fin_complete: bool = False

    def observe(self, from_orig: bool, flags: TcpFlag):
        # the last ACK of the close handshake, sent by the side that received the second FIN
        if (self.orig_fin and self.resp_fin and TcpFlag.ACK in flags
                and self.last_fin_by_orig_or_none is not None and from_orig != self.last_fin_by_orig_or_none):
            self.fin_complete = True

        if TcpFlag.SYN in flags:
            if from_orig and TcpFlag.ACK not in flags:
                self.orig_syn = True
            elif not from_orig and TcpFlag.ACK in flags:
                self.resp_syn_ack = True

        if TcpFlag.FIN in flags:
            if from_orig:
                self.orig_fin = True
            else:
                self.resp_fin = True
            self.last_fin_by_orig_or_none = from_orig

        if TcpFlag.RST in flags:
            if from_orig:
                self.orig_rst = True
            else:
                self.resp_rst = True
            if self.first_rst_by_orig_or_none is None:
                self.first_rst_by_orig_or_none = from_orig

    @property
    def reset(self) -> bool:
        return self.orig_rst or self.resp_rst

    def conn_state(self) -> ConnState:
        if not self.orig_syn:
            if self.resp_syn_ack and self.resp_rst:
                return ConnState.RSTRH
            if self.resp_syn_ack and self.resp_fin:
                return ConnState.SHR
            return ConnState.OTH

        if not self.resp_syn_ack:
            if self.resp_rst:
                return ConnState.REJ
            if self.orig_rst:
                return ConnState.RSTOS0
            if self.orig_fin:
                return ConnState.SH
            return ConnState.S0

        if self.reset:
            return ConnState.RSTO if self.first_rst_by_orig_or_none else ConnState.RSTR
        if self.orig_fin and self.resp_fin:
            return ConnState.SF
        if self.orig_fin:
            return ConnState.S2
        if self.resp_fin:
            return ConnState.S3
        return ConnState.S1


@attr.define
class FlowState:
    originator: FiveTuple        # 5-tuple of the first packet; its sender is the originator
    first_ts_us: EpochUs
    last_ts_us: EpochUs
    seq: int                     # creation order, breaks start-time ties
    orig: DirectionCounters = attr.Factory(DirectionCounters)
    resp: DirectionCounters = attr.Factory(DirectionCounters)
    tcp_or_none: Optional[TcpHistory] = None
    fragment: bool = False
    terminated_or_none: Optional[TerminationReason] = None

    @classmethod
    def open(cls, packet: PacketEvent, seq: int) -> 'FlowState':
        return cls(
            originator=packet.five_tuple,
            first_ts_us=packet.ts_us,
            last_ts_us=packet.ts_us,
            seq=seq,
            tcp_or_none=TcpHistory() if packet.five_tuple.protocol is Protocol.TCP and not packet.is_fragment else None,
            fragment=packet.is_fragment,
        )

    def add(self, packet: PacketEvent):
        from_orig = (
            packet.five_tuple.src_addr == self.originator.src_addr and
            packet.five_tuple.src_port == self.originator.src_port
        )
        (self.orig if from_orig else self.resp).add(packet)
        self.first_ts_us = min(self.first_ts_us, packet.ts_us)
        self.last_ts_us = max(self.last_ts_us, packet.ts_us)

        if self.tcp_or_none is not None and packet.tcp_flags is not None:
            self.tcp_or_none.observe(from_orig, packet.tcp_flags)

    def conn_state(self) -> ConnState:
        if self.fragment:
            return ConnState.OTH
        if self.tcp_or_none is not None:
            return self.tcp_or_none.conn_state()
        return ConnState.SF if self.orig.packets > 0 and self.resp.packets > 0 else ConnState.S0

    def finished_by_flags(self) -> Optional[TerminationReason]:
        if self.tcp_or_none is None:
            return None
        if self.tcp_or_none.reset:
            return TerminationReason.RST
        if self.tcp_or_none.fin_complete:
            return TerminationReason.FIN
        return None


@attr.define
class AssemblyStats:
    packets_accepted: int = 0
    packets_out_of_order: int = 0      # monotonicity errors, rejected
    sessions_emitted: int = 0
    sessions_forced: int = 0           # released past max_pending_sessions, ahead of an older open flow
    terminations: Counter[str] = attr.Factory(collections.Counter)


@attr.define
class FlowAssembler:
    """ The flow state table. See module doc for the emission order contract. """
    timeouts_us: Dict[Protocol, int]
    reorder_tolerance_us: int
    local_prefixes: LocalPrefixes
    service_map: ServiceMap
    max_pending_sessions: int = 100_000

    # one LRU per protocol, oldest activity first
    open_flows: Dict[Protocol, 'collections.OrderedDict[FlowKey, FlowState]'] = attr.Factory(
        lambda: {protocol: collections.OrderedDict() for protocol in Protocol}
    )
    stats: AssemblyStats = attr.Factory(AssemblyStats)
    high_water_us: Optional[EpochUs] = None

    _open_starts: List[Tuple[EpochUs, int, FlowKey]] = attr.Factory(list)   # lazy min-heap
    _finished: List[Tuple[EpochUs, int, FlowState]] = attr.Factory(list)    # min-heap by start
    _next_flow_seq: int = 0
    _next_session_id: int = 1

    @classmethod
    def from_config(cls, config: AssemblerConfig) -> 'FlowAssembler':
        return cls(
            timeouts_us={
                Protocol.TCP: int(config.tcp_inactivity_timeout_s * 1e6),
                Protocol.UDP: int(config.udp_inactivity_timeout_s * 1e6),
                Protocol.ICMP: int(config.icmp_inactivity_timeout_s * 1e6),
            },
            reorder_tolerance_us=int(config.reorder_tolerance_s * 1e6),
            local_prefixes=config.get_local_prefixes(),
            service_map=config.get_service_map(),
            max_pending_sessions=config.max_pending_sessions,
        )

    def open_flow_count(self) -> int:
        return sum(len(flows) for flows in self.open_flows.values())

    def advance(self, packet: PacketEvent) -> List[SessionRecord]:
        if self.high_water_us is not None and packet.ts_us < self.high_water_us - self.reorder_tolerance_us:
            self.stats.packets_out_of_order += 1
            logger.debug(f"out-of-order packet rejected: {packet.ts_us} < {self.high_water_us}")
            return []

        self.high_water_us = packet.ts_us if self.high_water_us is None else max(self.high_water_us, packet.ts_us)
        self._evict_expired(self.high_water_us)

        key = FlowKey.from_five_tuple(packet.five_tuple, fragment=packet.is_fragment)
        flows = self.open_flows[key.protocol]
        flow = flows.get(key)
        if flow is None:
            flow = FlowState.open(packet, seq=self._next_flow_seq)
            self._next_flow_seq += 1
            flows[key] = flow
        else:
            flows.move_to_end(key)

        first_ts_before = flow.first_ts_us
        flow.add(packet)
        self.stats.packets_accepted += 1
        if flow.first_ts_us != first_ts_before or flow.orig.packets + flow.resp.packets == 1:
            heapq.heappush(self._open_starts, (flow.first_ts_us, flow.seq, key))

        if (reason := flow.finished_by_flags()) is not None:
            self._finish(key, reason)

        return self._release(final=False)

    def flush_all(self, final_ts_us: Optional[EpochUs] = None) -> List[SessionRecord]:
        """ Closes every open flow as eof, leaving the table empty. """
        if final_ts_us is not None and self.high_water_us is not None:
            self.high_water_us = max(self.high_water_us, final_ts_us)
        for flows in self.open_flows.values():
            for key in list(flows):
                self._finish(key, TerminationReason.EOF)

        self._open_starts.clear()
        return self._release(final=True)

    def _evict_expired(self, now_us: EpochUs):
        for protocol, flows in self.open_flows.items():
            timeout_us = self.timeouts_us[protocol]
            while flows:
                key, flow = next(iter(flows.items()))
                if now_us - flow.last_ts_us <= timeout_us:
                    break
                self._finish(key, TerminationReason.TIMEOUT)

    def _finish(self, key: FlowKey, reason: TerminationReason):
        flow = self.open_flows[key.protocol].pop(key)
        flow.terminated_or_none = reason
        self.stats.terminations[reason.value] += 1
        heapq.heappush(self._finished, (flow.first_ts_us, flow.seq, flow))

    def _min_open_start_us(self) -> Optional[EpochUs]:
        while self._open_starts:
            first_ts_us, seq, key = self._open_starts[0]
            flow = self.open_flows[key.protocol].get(key)
            if flow is not None and flow.seq == seq and flow.first_ts_us == first_ts_us:
                return first_ts_us
            heapq.heappop(self._open_starts)
        return None

    def _compact_open_starts(self):
        """ Drops the stale heap entries once they outnumber the open flows. """
        n_open = self.open_flow_count()
        if len(self._open_starts) <= 2 * n_open + 64:
            return
        self._open_starts = [
            (flow.first_ts_us, flow.seq, key) for flows in self.open_flows.values() for key, flow in flows.items()
        ]
        heapq.heapify(self._open_starts)

    def _release(self, final: bool) -> List[SessionRecord]:
        if final:
            horizon_us = None
        else:
            # a flow opened later may still start up to the reorder tolerance in the past
            horizon_us = self.high_water_us - self.reorder_tolerance_us
            if (min_open_us := self._min_open_start_us()) is not None:
                horizon_us = min(horizon_us, min_open_us)

        released = []
        while self._finished and (horizon_us is None or self._finished[0][0] <= horizon_us):
            _, _, flow = heapq.heappop(self._finished)
            released.append(self._to_session_record(flow))

        n_forced = 0
        while len(self._finished) > self.max_pending_sessions:
            _, _, flow = heapq.heappop(self._finished)
            released.append(self._to_session_record(flow))
            n_forced += 1
        if n_forced:
            self.stats.sessions_forced += n_forced
            logger.warning(
                f"{n_forced} sessions released ahead of an open flow that holds the horizon at {horizon_us} us, "
                f"over max_pending_sessions={self.max_pending_sessions}"
            )
        self._compact_open_starts()
        return released

    def _to_session_record(self, flow: FlowState) -> SessionRecord:
        session_id = self._next_session_id
        self._next_session_id += 1
        self.stats.sessions_emitted += 1

        originator = flow.originator
        return SessionRecord(
            session_id=session_id,
            timestamp_ms=flow.first_ts_us // 1000,
            duration_s=(flow.last_ts_us - flow.first_ts_us) / 1e6,
            five_tuple=originator,
            service=service_of(originator.dst_port, originator.protocol, self.service_map),
            conn_state=flow.conn_state(),
            direction=direction_of(originator.src_addr, originator.dst_addr, self.local_prefixes),
            src_packets=flow.orig.packets,
            src_bytes=flow.orig.bytes,
            src_ip_bytes=flow.orig.ip_bytes,
            dst_packets=flow.resp.packets,
            dst_bytes=flow.resp.bytes,
            dst_ip_bytes=flow.resp.ip_bytes,
        )


def advance(state_table: FlowAssembler, packet: PacketEvent) -> List[SessionRecord]:
    return state_table.advance(packet)


def flush_all(state_table: FlowAssembler, final_ts_us: Optional[EpochUs] = None) -> List[SessionRecord]:
    return state_table.flush_all(final_ts_us)


def assemble(
    packets: Iterable[PacketEvent],
    config: Optional[AssemblerConfig] = None
) -> Tuple[List[SessionRecord], AssemblyStats]:
    """ Runs a whole packet stream through a fresh state table. """
    assembler = FlowAssembler.from_config(config if config is not None else AssemblerConfig())
    sessions = []
    for packet in packets:
        sessions.extend(assembler.advance(packet))
    sessions.extend(assembler.flush_all(assembler.high_water_us))
    return sessions, assembler.stats
