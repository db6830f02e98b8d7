""" Small builders shared by the tests. """
from typing import List, Optional

import numpy as np

from nids.capture import PacketEvent, TcpFlag
from nids.classifiers import Dataset
from nids.types import ConnState, Direction, FiveTuple, Protocol, SessionRecord

SPEC_VERSION = 'v1-test'


def make_session(
    session_id: int = 1,
    timestamp_ms: int = 1_000,
    src: str = '10.0.0.1',
    src_port: int = 40000,
    dst: str = '192.168.1.1',
    dst_port: int = 80,
    protocol: Protocol = Protocol.TCP,
    service: str = 'http',
    conn_state: ConnState = ConnState.SF,
    duration_s: float = 0.5,
    src_bytes: int = 100,
    dst_bytes: int = 1000,
    direction: Direction = Direction.L2L,
) -> SessionRecord:
    return SessionRecord(
        session_id=session_id,
        timestamp_ms=timestamp_ms,
        duration_s=duration_s,
        five_tuple=FiveTuple(src, src_port, dst, dst_port, protocol),
        service=service,
        conn_state=conn_state,
        direction=direction,
        src_packets=3,
        src_bytes=src_bytes,
        src_ip_bytes=src_bytes + 120,
        dst_packets=4,
        dst_bytes=dst_bytes,
        dst_ip_bytes=dst_bytes + 160,
    )


def random_sessions(n: int, seed: int = 0, n_destinations: int = 20, n_sources: int = 10) -> List[SessionRecord]:
    rng = np.random.default_rng(seed)
    states = list(ConnState)
    services = ['http', 'dns', 'ssh', 'other']
    sessions = []
    for i in range(n):
        sessions.append(make_session(
            session_id=i + 1,
            timestamp_ms=1_000 + 10 * i,
            src=f"10.0.0.{int(rng.integers(1, n_sources + 1))}",
            src_port=int(rng.integers(1024, 1034)),
            dst=f"192.168.1.{int(rng.integers(1, n_destinations + 1))}",
            dst_port=80,
            service=services[int(rng.integers(len(services)))],
            conn_state=states[int(rng.integers(len(states)))],
            duration_s=float(rng.uniform(0, 5)),
            src_bytes=int(rng.integers(0, 5000)),
            dst_bytes=int(rng.integers(0, 5000)),
        ))
    return sessions


def tcp_packet(
    ts_us: int,
    src: str,
    sport: int,
    dst: str,
    dport: int,
    flags: str,
    payload_len: int = 0,
) -> PacketEvent:
    return PacketEvent(
        ts_us=ts_us,
        five_tuple=FiveTuple(src, sport, dst, dport, Protocol.TCP),
        tcp_flags=TcpFlag.parse(flags),
        payload_len=payload_len,
        wire_len=40 + payload_len,
    )


def udp_packet(ts_us: int, src: str, sport: int, dst: str, dport: int, payload_len: int = 10) -> PacketEvent:
    return PacketEvent(
        ts_us=ts_us,
        five_tuple=FiveTuple(src, sport, dst, dport, Protocol.UDP),
        tcp_flags=None,
        payload_len=payload_len,
        wire_len=28 + payload_len,
    )


def blobs(
    n_per_class: int = 50,
    dimension: int = 2,
    gap: float = 0.6,
    noise: float = 0.05,
    seed: int = 0,
    spec_version: Optional[str] = None,
) -> Dataset:
    """ Two gaussian blobs in [0, 1]^d, class 1 shifted by `gap` along the first axis. """
    rng = np.random.default_rng(seed)
    normal = rng.normal(0.2, noise, size=(n_per_class, dimension))
    abnormal = rng.normal(0.2, noise, size=(n_per_class, dimension))
    abnormal[:, 0] += gap
    vectors = np.clip(np.vstack([normal, abnormal]), 0.0, 1.0)
    labels = np.array([0] * n_per_class + [1] * n_per_class, dtype=np.int8)
    return Dataset.build(vectors, labels, spec_version or SPEC_VERSION)
