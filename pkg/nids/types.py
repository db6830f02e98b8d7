""" Shared session vocabulary. Everything here is an immutable value object. """
import ipaddress
from typing import FrozenSet, Optional

import attr

from utils.custom_types import EpochMs
from utils.enum_utils import StrEnum

MAX_PORT = 65535


class Protocol(StrEnum):
    TCP = 'tcp'
    UDP = 'udp'
    ICMP = 'icmp'


class ServiceType(StrEnum):
    """ Built-in service vocabulary. Configured port mappings may add names outside of it,
    which is why session records carry the service as a plain string. """
    HTTP = 'http'
    HTTPS = 'https'
    DNS = 'dns'
    SMTP = 'smtp'
    FTP = 'ftp'
    SSH = 'ssh'
    OTHER = 'other'


class ConnState(StrEnum):
    """ Zeek-style connection summary """
    S0 = 'S0'          # attempt seen, no reply
    S1 = 'S1'          # established, not terminated
    S2 = 'S2'          # established, close attempt by originator only
    S3 = 'S3'          # established, close attempt by responder only
    SF = 'SF'          # normal establishment and termination
    REJ = 'REJ'        # attempt rejected
    RSTO = 'RSTO'      # established, originator aborted
    RSTR = 'RSTR'      # established, responder aborted
    RSTOS0 = 'RSTOS0'  # originator sent SYN then RST, no SYN-ACK seen
    RSTRH = 'RSTRH'    # responder sent SYN-ACK then RST, no originator SYN seen
    SH = 'SH'          # originator sent SYN then FIN, no SYN-ACK
    SHR = 'SHR'        # responder sent SYN-ACK then FIN, no originator SYN
    OTH = 'OTH'        # no SYN seen, midstream traffic


SYN_ERROR_STATES: FrozenSet[ConnState] = frozenset({ConnState.S0, ConnState.S1, ConnState.S2, ConnState.S3})


class Direction(StrEnum):
    L2L = 'L2L'
    L2R = 'L2R'
    R2L = 'R2L'
    R2R = 'R2R'


class Label(StrEnum):
    NORMAL = 'normal'
    ABNORMAL = 'abnormal'

    @property
    def as_int(self) -> int:
        return 1 if self is Label.ABNORMAL else 0

    @classmethod
    def from_int(cls, value: int) -> 'Label':
        return cls.ABNORMAL if value == 1 else cls.NORMAL


def _valid_address(_, attribute, value: str):
    try:
        ipaddress.ip_address(value)
    except ValueError as e:
        raise ValueError(f"{attribute.name}: {e}") from e


def _valid_port(_, attribute, value: int):
    if not 0 <= value <= MAX_PORT:
        raise ValueError(f"{attribute.name}={value} is outside 0..{MAX_PORT}")


def _non_negative(_, attribute, value):
    if value < 0:
        raise ValueError(f"{attribute.name}={value} must be non-negative")


@attr.frozen
class FiveTuple:
    src_addr: str = attr.ib(validator=_valid_address)
    src_port: int = attr.ib(validator=_valid_port)
    dst_addr: str = attr.ib(validator=_valid_address)
    dst_port: int = attr.ib(validator=_valid_port)
    protocol: Protocol = attr.ib(converter=Protocol)

    def __attrs_post_init__(self):
        if self.protocol is Protocol.ICMP and (self.src_port != 0 or self.dst_port != 0):
            raise ValueError(f"ICMP flows carry no ports, got {self.src_port=} {self.dst_port=}")

    def reversed(self) -> 'FiveTuple':
        return FiveTuple(self.dst_addr, self.dst_port, self.src_addr, self.src_port, self.protocol)


@attr.frozen
class SessionRecord:
    """ One session with the 16 basic features. Timestamp, duration and the 5-tuple
    account for 7 of them, service, state and direction for 3, the counters for 6. """
    session_id: int
    timestamp_ms: EpochMs             # session start
    duration_s: float = attr.ib(validator=_non_negative)
    five_tuple: FiveTuple
    service: str                      # a ServiceType value or a configured extension name
    conn_state: ConnState = attr.ib(converter=ConnState)
    direction: Direction = attr.ib(converter=Direction)
    src_packets: int = attr.ib(validator=_non_negative)
    src_bytes: int = attr.ib(validator=_non_negative)       # payload only
    src_ip_bytes: int = attr.ib(validator=_non_negative)    # including headers
    dst_packets: int = attr.ib(validator=_non_negative)
    dst_bytes: int = attr.ib(validator=_non_negative)
    dst_ip_bytes: int = attr.ib(validator=_non_negative)

    def __attrs_post_init__(self):
        if self.src_ip_bytes < self.src_bytes:
            raise ValueError(f"{self.src_ip_bytes=} < {self.src_bytes=}")
        if self.dst_ip_bytes < self.dst_bytes:
            raise ValueError(f"{self.dst_ip_bytes=} < {self.dst_bytes=}")

    @property
    def src_addr(self) -> str:
        return self.five_tuple.src_addr

    @property
    def dst_addr(self) -> str:
        return self.five_tuple.dst_addr

    @property
    def protocol(self) -> Protocol:
        return self.five_tuple.protocol

    @property
    def is_syn_error(self) -> bool:
        return self.conn_state in SYN_ERROR_STATES


@attr.frozen
class ClassLabel:
    label: Label = attr.ib(converter=Label)
    attack_category: Optional[str] = None

    def __attrs_post_init__(self):
        if self.attack_category is not None and self.label is not Label.ABNORMAL:
            raise ValueError("attack_category is only meaningful for ABNORMAL sessions")

    @classmethod
    def normal(cls) -> 'ClassLabel':
        return cls(Label.NORMAL)

    @classmethod
    def abnormal(cls, attack_category: Optional[str] = None) -> 'ClassLabel':
        return cls(Label.ABNORMAL, attack_category)

    @property
    def is_abnormal(self) -> bool:
        return self.label is Label.ABNORMAL


@attr.frozen
class LabeledSession:
    session: SessionRecord
    label_or_none: Optional[ClassLabel] = None
