""" Synthetic labeled traffic, at session level and at packet level.

Normal sessions are short client conversations with well-known services. Attacks come in
two shapes: scan bursts (one source probing many ports of one host, mostly unanswered)
and floods (few long sessions with very large byte counts).
"""
import logging
from typing import Iterator, List, Tuple

import attr
import numpy as np

from nids.capture import PacketEvent, TcpFlag
from nids.services import DEFAULT_SERVICE_PORTS
from nids.types import ClassLabel, ConnState, Direction, FiveTuple, LabeledSession, Protocol, SessionRecord

logger = logging.getLogger(__name__)

SCAN = 'Reconnaissance'
FLOOD = 'DoS'

_IP_HEADER = 20
_TCP_HEADER = 20
_UDP_HEADER = 8
_ICMP_HEADER = 8

_SERVICE_PORTS: Tuple[Tuple[int, Protocol], ...] = tuple(sorted(DEFAULT_SERVICE_PORTS, key=lambda k: (k[1], k[0])))


def _session(
    session_id: int,
    timestamp_ms: int,
    duration_s: float,
    five_tuple: FiveTuple,
    service: str,
    conn_state: ConnState,
    packets: Tuple[int, int],
    payload: Tuple[int, int],
) -> SessionRecord:
    header = _IP_HEADER + (_TCP_HEADER if five_tuple.protocol is Protocol.TCP else _UDP_HEADER)
    return SessionRecord(
        session_id=session_id,
        timestamp_ms=timestamp_ms,
        duration_s=duration_s,
        five_tuple=five_tuple,
        service=service,
        conn_state=conn_state,
        direction=Direction.L2R if five_tuple.src_addr.startswith('10.') else Direction.R2L,
        src_packets=packets[0],
        src_bytes=payload[0],
        src_ip_bytes=payload[0] + header * packets[0],
        dst_packets=packets[1],
        dst_bytes=payload[1],
        dst_ip_bytes=payload[1] + header * packets[1],
    )


@attr.define
class SyntheticTraffic:
    n_sessions: int = 10_000
    attack_share: float = 0.1
    n_destinations: int = 20
    n_sources: int = 50
    mean_gap_ms: float = 2.0
    start_ms: int = 1_420_070_400_000    # 2015-01-01 UTC
    separable: bool = False
    seed: int = 0

    @classmethod
    def from_defaults(cls, n_sessions: int = 10_000, seed: int = 0) -> 'SyntheticTraffic':
        return cls(n_sessions=n_sessions, seed=seed)

    @classmethod
    def separable_variant(cls, n_sessions: int = 2_000, seed: int = 0) -> 'SyntheticTraffic':
        """ Attacks differ from normal sessions by a wide gap in src_bytes and packet counts, far beyond the noise. """
        return cls(n_sessions=n_sessions, attack_share=0.5, separable=True, seed=seed)

    def _address(self, rng: np.random.Generator, local: bool, pool: int) -> str:
        i = int(rng.integers(pool))
        return f"10.0.{i // 250}.{i % 250 + 1}" if local else f"175.45.{i // 250}.{i % 250 + 1}"

    def stream(self) -> Iterator[LabeledSession]:
        rng = np.random.default_rng(self.seed)
        now_ms = float(self.start_ms)
        session_id = 1
        while session_id <= self.n_sessions:
            now_ms += rng.exponential(self.mean_gap_ms)
            if rng.random() < self.attack_share:
                make = self._separable_attack if self.separable else (
                    self._scan_burst if rng.random() < 0.5 else self._flood)
            else:
                make = self._separable_normal if self.separable else self._normal
            for session, label in make(rng, session_id, int(now_ms)):
                if session_id > self.n_sessions:
                    break
                now_ms = max(now_ms, float(session.timestamp_ms))
                yield LabeledSession(session, label)
                session_id += 1

    def generate(self) -> List[LabeledSession]:
        return list(self.stream())

    # -----------------------------------------------------------------------------------------------------------------

    def _normal(self, rng: np.random.Generator, session_id: int, ts_ms: int):
        port, protocol = _SERVICE_PORTS[int(rng.integers(len(_SERVICE_PORTS)))]
        five_tuple = FiveTuple(
            self._address(rng, True, self.n_sources), int(rng.integers(1024, 65536)),
            self._address(rng, False, self.n_destinations), port, protocol,
        )
        request = int(rng.lognormal(5.5, 0.8))
        response = int(rng.lognormal(7.5, 1.2))
        packets = (int(rng.integers(2, 12)), int(rng.integers(2, 20)))
        state = ConnState.SF if protocol is Protocol.TCP or rng.random() < 0.95 else ConnState.S0
        if state is ConnState.S0:
            packets, response = (packets[0], 0), 0
        service = str(DEFAULT_SERVICE_PORTS[(port, protocol)])
        yield _session(session_id, ts_ms, float(rng.exponential(0.8)), five_tuple, service, state, packets,
                       (request, response)), ClassLabel.normal()

    def _scan_burst(self, rng: np.random.Generator, session_id: int, ts_ms: int):
        attacker = self._address(rng, False, 5)
        victim = self._address(rng, True, self.n_destinations)
        src_port = int(rng.integers(1024, 65536))
        for i, dst_port in enumerate(rng.choice(np.arange(1, 1025), size=int(rng.integers(10, 40)), replace=False)):
            state = ConnState.S0 if rng.random() < 0.7 else ConnState.REJ
            five_tuple = FiveTuple(attacker, src_port, victim, int(dst_port), Protocol.TCP)
            service = str(DEFAULT_SERVICE_PORTS.get((int(dst_port), Protocol.TCP), 'other'))
            packets = (1, 0 if state is ConnState.S0 else 1)
            yield _session(session_id + i, ts_ms + i, 0.0, five_tuple, service, state, packets, (0, 0)), \
                ClassLabel.abnormal(SCAN)

    def _flood(self, rng: np.random.Generator, session_id: int, ts_ms: int):
        five_tuple = FiveTuple(
            self._address(rng, False, 5), int(rng.integers(1024, 65536)),
            self._address(rng, True, self.n_destinations), 80, Protocol.TCP,
        )
        packets = (int(rng.integers(500, 5000)), int(rng.integers(1, 10)))
        payload = (packets[0] * int(rng.integers(500, 1460)), int(rng.integers(0, 2000)))
        yield _session(session_id, ts_ms, float(rng.uniform(5, 60)), five_tuple, 'http', ConnState.SF, packets,
                       payload), ClassLabel.abnormal(FLOOD)

    def _separable_normal(self, rng: np.random.Generator, session_id: int, ts_ms: int):
        five_tuple = FiveTuple(
            self._address(rng, True, self.n_sources), int(rng.integers(1024, 65536)),
            self._address(rng, False, self.n_destinations), 80, Protocol.TCP,
        )
        payload = (int(rng.normal(500, 10)), int(rng.normal(2000, 10)))
        yield _session(session_id, ts_ms, float(rng.uniform(0.1, 1.0)), five_tuple, 'http', ConnState.SF, (4, 4),
                       payload), ClassLabel.normal()

    def _separable_attack(self, rng: np.random.Generator, session_id: int, ts_ms: int):
        five_tuple = FiveTuple(
            self._address(rng, True, self.n_sources), int(rng.integers(1024, 65536)),
            self._address(rng, False, self.n_destinations), 80, Protocol.TCP,
        )
        payload = (int(rng.normal(50_000, 10)), int(rng.normal(2000, 10)))
        yield _session(session_id, ts_ms, float(rng.uniform(0.1, 1.0)), five_tuple, 'http', ConnState.SF, (40, 4),
                       payload), ClassLabel.abnormal(FLOOD)


# ---------------------------------------------------------------------------------------------------------------------
# packets

def _tcp_conversation(client: FiveTuple, start_us: int, rng: np.random.Generator) -> List[PacketEvent]:
    server = client.reversed()
    request, response = int(rng.integers(50, 500)), int(rng.integers(100, 3000))
    script = [
        (client, TcpFlag.SYN, 0),
        (server, TcpFlag.SYN | TcpFlag.ACK, 0),
        (client, TcpFlag.ACK, 0),
        (client, TcpFlag.ACK, request),
        (server, TcpFlag.ACK, response),
        (client, TcpFlag.FIN | TcpFlag.ACK, 0),
        (server, TcpFlag.FIN | TcpFlag.ACK, 0),
        (client, TcpFlag.ACK, 0),
    ]
    return [
        PacketEvent(start_us + 1000 * i, side, flags, payload, _IP_HEADER + _TCP_HEADER + payload)
        for i, (side, flags, payload) in enumerate(script)
    ]


def _udp_exchange(client: FiveTuple, start_us: int, rng: np.random.Generator) -> List[PacketEvent]:
    request, response = int(rng.integers(20, 100)), int(rng.integers(50, 500))
    return [
        PacketEvent(start_us, client, None, request, _IP_HEADER + _UDP_HEADER + request),
        PacketEvent(start_us + 500, client.reversed(), None, response, _IP_HEADER + _UDP_HEADER + response),
    ]


def _icmp_echo(client: FiveTuple, start_us: int, rng: np.random.Generator) -> List[PacketEvent]:
    payload = 56
    wire = _IP_HEADER + _ICMP_HEADER + payload
    return [
        PacketEvent(start_us, client, None, payload, wire, icmp_type_code=(8, 0)),
        PacketEvent(start_us + 300, client.reversed(), None, payload, wire, icmp_type_code=(0, 0)),
    ]


def synthetic_packets(
    n_flows: int = 100,
    seed: int = 0,
    start_us: int = 1_420_070_400_000_000,
    flow_gap_us: int = 2_000,
) -> List[PacketEvent]:
    """ TCP handshakes with a clean close, UDP request/reply pairs and ICMP echoes, interleaved in time order. """
    rng = np.random.default_rng(seed)
    packets: List[PacketEvent] = []
    for i in range(n_flows):
        client_addr = f"10.1.{i // 250}.{i % 250 + 1}"
        server_addr = f"93.184.{int(rng.integers(0, 4))}.{int(rng.integers(1, 255))}"
        flow_start = start_us + i * flow_gap_us
        match i % 3:
            case 0:
                client = FiveTuple(client_addr, int(rng.integers(1024, 65536)), server_addr, 80, Protocol.TCP)
                packets.extend(_tcp_conversation(client, flow_start, rng))
            case 1:
                client = FiveTuple(client_addr, int(rng.integers(1024, 65536)), server_addr, 53, Protocol.UDP)
                packets.extend(_udp_exchange(client, flow_start, rng))
            case 2:
                client = FiveTuple(client_addr, 0, server_addr, 0, Protocol.ICMP)
                packets.extend(_icmp_echo(client, flow_start, rng))
    return sorted(packets, key=lambda p: p.ts_us)
