""" Packet input: classic pcap files (via dpkt) and the packet-event JSONL format.

Only Ethernet captures are understood. IPv4 TCP/UDP/ICMP packets become PacketEvents,
everything else is counted by reason and skipped.
"""
import collections
import enum
import ipaddress
import json
import logging
from typing import BinaryIO, Counter, Dict, Iterable, Iterator, List, Optional, TextIO, Tuple

import attr
import dpkt

from nids.errors import PcapParseError
from nids.types import FiveTuple, Protocol
from utils.custom_types import EpochUs
from utils.enum_utils import parse_enum

logger = logging.getLogger(__name__)

# global header magics, read as a big-endian u32
_MAGIC_USEC_BE = 0xA1B2C3D4
_MAGIC_NSEC_BE = 0xA1B23C4D
_MAGIC_USEC_LE = 0xD4C3B2A1
_MAGIC_NSEC_LE = 0x4D3CB2A1

_GLOBAL_HEADER_LEN = 24
_RECORD_HEADER_LEN = 16

_UDP_HEADER_LEN = 8
_ICMP_HEADER_LEN = 8


class TcpFlag(enum.Flag):
    FIN = dpkt.tcp.TH_FIN
    SYN = dpkt.tcp.TH_SYN
    RST = dpkt.tcp.TH_RST
    ACK = dpkt.tcp.TH_ACK

    @classmethod
    def from_tcp_header(cls, raw_flags: int) -> 'TcpFlag':
        return cls(raw_flags & (dpkt.tcp.TH_FIN | dpkt.tcp.TH_SYN | dpkt.tcp.TH_RST | dpkt.tcp.TH_ACK))

    @classmethod
    def parse(cls, raw) -> 'TcpFlag':
        """ Accepts ["SYN", "ACK"], "SYN|ACK" or tcpdump letters like "SA". """
        if isinstance(raw, (list, tuple)):
            names = [str(x).upper() for x in raw]
        elif '|' in raw or raw.upper() in cls.__members__:
            names = [x.strip().upper() for x in raw.split('|') if x.strip()]
        else:
            letters = {'S': 'SYN', 'A': 'ACK', 'F': 'FIN', 'R': 'RST', '.': 'ACK'}
            names = [letters[ch] for ch in raw.upper()]

        flags = cls(0)
        for name in names:
            flags |= cls[name]
        return flags

    def names(self) -> List[str]:
        return [flag.name for flag in TcpFlag if flag in self]


@attr.frozen
class PacketEvent:
    ts_us: EpochUs
    five_tuple: FiveTuple            # as observed on the wire, not canonicalized
    tcp_flags: Optional[TcpFlag]     # present iff TCP
    payload_len: int
    wire_len: int                    # IP total length
    icmp_type_code: Optional[Tuple[int, int]] = None
    is_fragment: bool = False        # a non-first IP fragment, no L4 header available

    def __attrs_post_init__(self):
        if self.wire_len < self.payload_len:
            raise ValueError(f"{self.wire_len=} < {self.payload_len=}")
        if (self.tcp_flags is not None) != (self.five_tuple.protocol is Protocol.TCP):
            raise ValueError("tcp_flags must be present exactly for TCP packets")

    def to_json_dict(self) -> Dict:
        data = {
            'ts_us': self.ts_us,
            'src': self.five_tuple.src_addr,
            'sport': self.five_tuple.src_port,
            'dst': self.five_tuple.dst_addr,
            'dport': self.five_tuple.dst_port,
            'proto': self.five_tuple.protocol.value,
            'flags': self.tcp_flags.names() if self.tcp_flags is not None else None,
            'payload_len': self.payload_len,
            'wire_len': self.wire_len,
        }
        if self.icmp_type_code is not None:
            data['icmp_type'], data['icmp_code'] = self.icmp_type_code
        if self.is_fragment:
            data['fragment'] = True
        return data

    @classmethod
    def from_json_dict(cls, data: Dict) -> 'PacketEvent':
        protocol = parse_enum(Protocol, str(data['proto']))
        flags_raw = data.get('flags')
        tcp_flags = None
        if protocol is Protocol.TCP:
            tcp_flags = TcpFlag.parse(flags_raw) if flags_raw else TcpFlag(0)

        icmp_type_code = None
        if 'icmp_type' in data:
            icmp_type_code = (int(data['icmp_type']), int(data.get('icmp_code', 0)))

        return cls(
            ts_us=int(data['ts_us']),
            five_tuple=FiveTuple(
                src_addr=str(data['src']),
                src_port=int(data.get('sport') or 0),
                dst_addr=str(data['dst']),
                dst_port=int(data.get('dport') or 0),
                protocol=protocol,
            ),
            tcp_flags=tcp_flags,
            payload_len=int(data['payload_len']),
            wire_len=int(data['wire_len']),
            icmp_type_code=icmp_type_code,
            is_fragment=bool(data.get('fragment', False)),
        )


@attr.define
class CaptureStats:
    accepted: int = 0
    skipped: Counter[str] = attr.Factory(collections.Counter)
    truncated: bool = False
    notice_or_none: Optional[str] = None

    @property
    def skipped_total(self) -> int:
        return sum(self.skipped.values())


@attr.define
class PcapReadResult:
    events: List[PacketEvent]
    stats: CaptureStats


class _RecordLayout:
    """ Which dpkt header classes and timestamp unit a capture uses. """

    def __init__(self, magic: int):
        if magic in (_MAGIC_USEC_BE, _MAGIC_NSEC_BE):
            self.file_hdr, self.pkt_hdr = dpkt.pcap.FileHdr, dpkt.pcap.PktHdr
        elif magic in (_MAGIC_USEC_LE, _MAGIC_NSEC_LE):
            self.file_hdr, self.pkt_hdr = dpkt.pcap.LEFileHdr, dpkt.pcap.LEPktHdr
        else:
            raise PcapParseError(f"not a classic pcap file (magic {magic:#010x})")
        self.nanosecond = magic in (_MAGIC_NSEC_BE, _MAGIC_NSEC_LE)

    def to_us(self, tv_sec: int, tv_frac: int) -> EpochUs:
        if self.nanosecond:
            return tv_sec * 1_000_000 + tv_frac // 1000
        return tv_sec * 1_000_000 + tv_frac


def iter_pcap(stream: BinaryIO, stats: CaptureStats) -> Iterator[PacketEvent]:
    """ Lazily decode a capture. `stats` is filled in as we go. """
    global_header = stream.read(_GLOBAL_HEADER_LEN)
    if len(global_header) < _GLOBAL_HEADER_LEN:
        raise PcapParseError(f"truncated pcap global header ({len(global_header)} of {_GLOBAL_HEADER_LEN} bytes)")

    layout = _RecordLayout(int.from_bytes(global_header[:4], 'big'))
    file_hdr = layout.file_hdr(global_header)
    if file_hdr.linktype != dpkt.pcap.DLT_EN10MB:
        raise PcapParseError(f"unsupported link type {file_hdr.linktype}, only Ethernet captures are read")

    record_no = 0
    while True:
        raw_header = stream.read(_RECORD_HEADER_LEN)
        if not raw_header:
            return
        if len(raw_header) < _RECORD_HEADER_LEN:
            _mark_truncated(stats, f"record {record_no}: header cut short after {len(raw_header)} bytes")
            return

        pkt_hdr = layout.pkt_hdr(raw_header)
        frame = stream.read(pkt_hdr.caplen)
        if len(frame) < pkt_hdr.caplen:
            _mark_truncated(stats, f"record {record_no}: {len(frame)} of {pkt_hdr.caplen} captured bytes present")
            return

        record_no += 1
        event_or_reason = decode_ethernet_frame(frame, layout.to_us(pkt_hdr.tv_sec, pkt_hdr.tv_usec))
        if isinstance(event_or_reason, str):
            stats.skipped[event_or_reason] += 1
        else:
            stats.accepted += 1
            yield event_or_reason


def _mark_truncated(stats: CaptureStats, notice: str):
    stats.truncated = True
    stats.notice_or_none = f"capture truncated, {notice}"
    logger.warning(stats.notice_or_none)


def read_pcap(stream: BinaryIO) -> PcapReadResult:
    stats = CaptureStats()
    events = list(iter_pcap(stream, stats))
    if stats.skipped:
        logger.info(f"skipped {stats.skipped_total} frames: {dict(stats.skipped)}")
    return PcapReadResult(events=events, stats=stats)


def decode_ethernet_frame(frame: bytes, ts_us: EpochUs) -> PacketEvent | str:
    """ Returns the event, or the reason the frame was skipped. """
    try:
        eth = dpkt.ethernet.Ethernet(frame)
    except (dpkt.UnpackError, dpkt.NeedData):
        return 'malformed_ethernet'

    ip = eth.data
    if isinstance(ip, dpkt.ip6.IP6):
        return 'ipv6'
    if not isinstance(ip, dpkt.ip.IP):
        return 'non_ip'

    src = str(ipaddress.IPv4Address(ip.src))
    dst = str(ipaddress.IPv4Address(ip.dst))
    ip_header_len = ip.hl * 4
    wire_len = ip.len

    try:
        protocol = {dpkt.ip.IP_PROTO_TCP: Protocol.TCP, dpkt.ip.IP_PROTO_UDP: Protocol.UDP,
                    dpkt.ip.IP_PROTO_ICMP: Protocol.ICMP}[ip.p]
    except KeyError:
        return 'unsupported_protocol'

    if ip.off & dpkt.ip.IP_OFFMASK:
        return PacketEvent(
            ts_us=ts_us,
            five_tuple=FiveTuple(src, 0, dst, 0, protocol),
            tcp_flags=TcpFlag(0) if protocol is Protocol.TCP else None,
            payload_len=max(0, wire_len - ip_header_len),
            wire_len=wire_len,
            is_fragment=True,
        )

    l4 = ip.data
    match protocol:
        case Protocol.TCP if isinstance(l4, dpkt.tcp.TCP):
            return PacketEvent(
                ts_us=ts_us,
                five_tuple=FiveTuple(src, l4.sport, dst, l4.dport, protocol),
                tcp_flags=TcpFlag.from_tcp_header(l4.flags),
                payload_len=max(0, wire_len - ip_header_len - l4.off * 4),
                wire_len=wire_len,
            )
        case Protocol.UDP if isinstance(l4, dpkt.udp.UDP):
            return PacketEvent(
                ts_us=ts_us,
                five_tuple=FiveTuple(src, l4.sport, dst, l4.dport, protocol),
                tcp_flags=None,
                payload_len=max(0, wire_len - ip_header_len - _UDP_HEADER_LEN),
                wire_len=wire_len,
            )
        case Protocol.ICMP if isinstance(l4, dpkt.icmp.ICMP):
            return PacketEvent(
                ts_us=ts_us,
                five_tuple=FiveTuple(src, 0, dst, 0, protocol),
                tcp_flags=None,
                payload_len=max(0, wire_len - ip_header_len - _ICMP_HEADER_LEN),
                wire_len=wire_len,
                icmp_type_code=(l4.type, l4.code),
            )
        case _:
            return 'malformed_transport'


def iter_packets_jsonl(lines: Iterable[str], stats: Optional[CaptureStats] = None) -> Iterator[PacketEvent]:
    stats = stats if stats is not None else CaptureStats()
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            event = PacketEvent.from_json_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as e:
            logger.debug(f"packet line {line_no} skipped: {e}")
            stats.skipped['malformed_json'] += 1
            continue
        stats.accepted += 1
        yield event


def read_packets_jsonl(stream: TextIO) -> PcapReadResult:
    stats = CaptureStats()
    events = list(iter_packets_jsonl(stream, stats))
    return PcapReadResult(events=events, stats=stats)


def write_packets_jsonl(events: Iterable[PacketEvent], stream: TextIO) -> int:
    count = 0
    for event in events:
        stream.write(json.dumps(event.to_json_dict(), separators=(',', ':')) + '\n')
        count += 1
    return count
