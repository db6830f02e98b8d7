import io
import socket

import dpkt
import pytest

from nids.assembler import assemble
from nids.capture import PacketEvent, TcpFlag, read_packets_jsonl, read_pcap, write_packets_jsonl
from nids.errors import PcapParseError
from nids.types import Protocol
from sim.traffic import synthetic_packets


def _frame(event: PacketEvent) -> bytes:
    ft = event.five_tuple
    payload = b'x' * event.payload_len
    match ft.protocol:
        case Protocol.TCP:
            l4 = dpkt.tcp.TCP(sport=ft.src_port, dport=ft.dst_port, flags=event.tcp_flags.value, data=payload)
            proto = dpkt.ip.IP_PROTO_TCP
        case Protocol.UDP:
            l4 = dpkt.udp.UDP(sport=ft.src_port, dport=ft.dst_port, ulen=8 + len(payload), data=payload)
            proto = dpkt.ip.IP_PROTO_UDP
        case Protocol.ICMP:
            icmp_type, icmp_code = event.icmp_type_code
            l4 = dpkt.icmp.ICMP(type=icmp_type, code=icmp_code, data=payload)
            proto = dpkt.ip.IP_PROTO_ICMP
    l4_bytes = bytes(l4)
    ip = dpkt.ip.IP(src=socket.inet_aton(ft.src_addr), dst=socket.inet_aton(ft.dst_addr), p=proto, data=l4_bytes)
    ip.len = 20 + len(l4_bytes)
    eth = dpkt.ethernet.Ethernet(src=b'\x02' * 6, dst=b'\x04' * 6, type=dpkt.ethernet.ETH_TYPE_IP, data=ip)
    return bytes(eth)


def _write_pcap(frames_with_ts) -> bytes:
    buffer = io.BytesIO()
    writer = dpkt.pcap.Writer(buffer)
    for frame, ts_us in frames_with_ts:
        writer.writepkt(frame, ts=ts_us / 1e6)
    return buffer.getvalue()


def _get_test_setup():
    packets = synthetic_packets(n_flows=12, seed=2, start_us=1_000_000_000)
    pcap = _write_pcap([(_frame(p), p.ts_us) for p in packets])
    return packets, pcap


def test_pcap_decodes_to_the_same_events():
    packets, pcap = _get_test_setup()
    result = read_pcap(io.BytesIO(pcap))

    assert result.stats.accepted == len(packets)
    assert not result.stats.truncated
    assert result.events == packets


def test_pcap_and_jsonl_give_identical_sessions():
    packets, pcap = _get_test_setup()
    text = io.StringIO()
    write_packets_jsonl(packets, text)
    text.seek(0)

    from_jsonl, _ = assemble(read_packets_jsonl(text).events)
    from_pcap, _ = assemble(read_pcap(io.BytesIO(pcap)).events)
    assert from_jsonl == from_pcap
    assert len(from_pcap) == 12


def test_non_ip_frames_are_counted_and_skipped():
    packets, _ = _get_test_setup()
    arp = bytes(dpkt.ethernet.Ethernet(
        src=b'\x02' * 6, dst=b'\xff' * 6, type=dpkt.ethernet.ETH_TYPE_ARP, data=dpkt.arp.ARP()
    ))
    pcap = _write_pcap([(_frame(packets[0]), packets[0].ts_us), (arp, packets[0].ts_us + 1)])

    result = read_pcap(io.BytesIO(pcap))
    assert result.stats.accepted == 1
    assert result.stats.skipped == {'non_ip': 1}


def test_truncated_capture_keeps_the_complete_records():
    packets, pcap = _get_test_setup()
    result = read_pcap(io.BytesIO(pcap[:-5]))

    assert result.stats.truncated
    assert result.stats.notice_or_none is not None
    assert result.events == packets[:-1]


def test_not_a_pcap_raises():
    with pytest.raises(PcapParseError):
        read_pcap(io.BytesIO(b'\x00' * 64))
    with pytest.raises(PcapParseError):
        read_pcap(io.BytesIO(b'\xd4\xc3\xb2'))


def test_malformed_jsonl_lines_are_skipped():
    packets, _ = _get_test_setup()
    text = io.StringIO()
    write_packets_jsonl(packets[:3], text)
    lines = text.getvalue().splitlines()
    lines.insert(1, '{"ts_us": 1, "proto": "tcp"')

    result = read_packets_jsonl(io.StringIO('\n'.join(lines)))
    assert result.events == packets[:3]
    assert result.stats.skipped == {'malformed_json': 1}


@pytest.mark.parametrize('raw', [['SYN', 'ACK'], 'SYN|ACK', 'SA'])
def test_tcp_flag_spellings(raw):
    assert TcpFlag.parse(raw) == TcpFlag.SYN | TcpFlag.ACK
