""" Binary codec for full feature records at the stage boundary.

A message is laid out like an Avro single-object encoding with a length prefix:

    C3 01 | schema fingerprint (8 bytes, little endian) | body length (long) | body

The body holds the schema's fields in order. Longs are zigzag varints, strings are a
long byte count followed by UTF-8, doubles are 8 bytes little endian. The fingerprint
is the 64-bit Rabin fingerprint of the schema's canonical JSON.
"""
import json
import struct
from typing import Any, Dict, List, Tuple

import attr

from nids.errors import CodecError, SchemaMismatchError, TruncatedRecordError
from nids.host_features import FullFeatureRecord, HostFeatures
from nids.types import FiveTuple, SessionRecord

MAGIC = b'\xc3\x01'

LONG = 'long'
DOUBLE = 'double'
STRING = 'string'

_DOUBLE = struct.Struct('<d')
_FINGERPRINT = struct.Struct('<Q')

_RABIN_EMPTY = 0xC15D213AA4D7A795


def _rabin_table() -> List[int]:
    table = []
    for i in range(256):
        fp = i
        for _ in range(8):
            fp = (fp >> 1) ^ (_RABIN_EMPTY & -(fp & 1))
        table.append(fp)
    return table


_RABIN_TABLE = _rabin_table()


def rabin_fingerprint(data: bytes) -> int:
    fp = _RABIN_EMPTY
    for byte in data:
        fp = (fp >> 8) ^ _RABIN_TABLE[(fp ^ byte) & 0xFF]
    return fp


FULL_FEATURE_FIELDS: Tuple[Tuple[str, str], ...] = (
    ('session_id', LONG),
    ('timestamp_ms', LONG),
    ('duration_s', DOUBLE),
    ('src_addr', STRING),
    ('src_port', LONG),
    ('dst_addr', STRING),
    ('dst_port', LONG),
    ('protocol', STRING),
    ('service', STRING),
    ('conn_state', STRING),
    ('direction', STRING),
    ('src_packets', LONG),
    ('src_bytes', LONG),
    ('src_ip_bytes', LONG),
    ('dst_packets', LONG),
    ('dst_bytes', LONG),
    ('dst_ip_bytes', LONG),
    *((name, LONG) for name in HostFeatures.names()),
)


@attr.frozen
class CodecSchema:
    name: str
    fields: Tuple[Tuple[str, str], ...]
    fingerprint: int = attr.ib(init=False)

    def __attrs_post_init__(self):
        for field_name, field_type in self.fields:
            if field_type not in (LONG, DOUBLE, STRING):
                raise ValueError(f"field {field_name}: unsupported type {field_type!r}")
        object.__setattr__(self, 'fingerprint', rabin_fingerprint(self.canonical_json().encode()))

    @classmethod
    def full_features(cls) -> 'CodecSchema':
        return cls(name='FullFeatureRecord', fields=FULL_FEATURE_FIELDS)

    def canonical_json(self) -> str:
        return json.dumps(
            {'name': self.name, 'type': 'record', 'fields': [{'name': n, 'type': t} for n, t in self.fields]},
            separators=(',', ':'),
        )


DEFAULT_SCHEMA = CodecSchema.full_features()


# ---------------------------------------------------------------------------------------------------------------------
# primitives

def _zigzag(n: int) -> int:
    return n << 1 if n >= 0 else ((-n) << 1) - 1


def _unzigzag(z: int) -> int:
    return z >> 1 if not z & 1 else -((z + 1) >> 1)


def write_long(out: bytearray, n: int):
    z = _zigzag(n)
    while True:
        byte = z & 0x7F
        z >>= 7
        if z:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def write_string(out: bytearray, s: str):
    data = s.encode('utf-8')
    write_long(out, len(data))
    out += data


def write_double(out: bytearray, x: float):
    out += _DOUBLE.pack(x)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data, self.pos = data, pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise TruncatedRecordError(f"need {n} bytes at offset {self.pos}, only {len(self.data) - self.pos} left")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def read_long(self) -> int:
        z, shift = 0, 0
        while True:
            if self.pos >= len(self.data):
                raise TruncatedRecordError(f"varint cut short at offset {self.pos}")
            byte = self.data[self.pos]
            self.pos += 1
            z |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return _unzigzag(z)
            shift += 7
            if shift > 70:
                raise CodecError(f"varint too long at offset {self.pos}")

    def read_string(self) -> str:
        raw = self.take(self.read_long())
        try:
            return raw.decode('utf-8')
        except UnicodeDecodeError as e:
            raise CodecError(f"invalid UTF-8 string: {e}") from e

    def read_double(self) -> float:
        return _DOUBLE.unpack(self.take(8))[0]


# ---------------------------------------------------------------------------------------------------------------------
# records

def record_to_fields(record: FullFeatureRecord) -> Dict[str, Any]:
    s = record.session
    return {
        'session_id': s.session_id,
        'timestamp_ms': s.timestamp_ms,
        'duration_s': s.duration_s,
        'src_addr': s.five_tuple.src_addr,
        'src_port': s.five_tuple.src_port,
        'dst_addr': s.five_tuple.dst_addr,
        'dst_port': s.five_tuple.dst_port,
        'protocol': str(s.five_tuple.protocol),
        'service': str(s.service),
        'conn_state': str(s.conn_state),
        'direction': str(s.direction),
        'src_packets': s.src_packets,
        'src_bytes': s.src_bytes,
        'src_ip_bytes': s.src_ip_bytes,
        'dst_packets': s.dst_packets,
        'dst_bytes': s.dst_bytes,
        'dst_ip_bytes': s.dst_ip_bytes,
        **attr.asdict(record.host),
    }


def record_from_fields(values: Dict[str, Any]) -> FullFeatureRecord:
    session = SessionRecord(
        session_id=values['session_id'],
        timestamp_ms=values['timestamp_ms'],
        duration_s=values['duration_s'],
        five_tuple=FiveTuple(
            values['src_addr'], values['src_port'], values['dst_addr'], values['dst_port'], values['protocol']
        ),
        service=values['service'],
        conn_state=values['conn_state'],
        direction=values['direction'],
        src_packets=values['src_packets'],
        src_bytes=values['src_bytes'],
        src_ip_bytes=values['src_ip_bytes'],
        dst_packets=values['dst_packets'],
        dst_bytes=values['dst_bytes'],
        dst_ip_bytes=values['dst_ip_bytes'],
    )
    host = HostFeatures(**{name: values[name] for name in HostFeatures.names()})
    return FullFeatureRecord(session=session, host=host)


def encode_body(record: FullFeatureRecord, schema: CodecSchema = DEFAULT_SCHEMA) -> bytes:
    values = record_to_fields(record)
    out = bytearray()
    for name, field_type in schema.fields:
        value = values[name]
        match field_type:
            case 'long':
                write_long(out, int(value))
            case 'double':
                write_double(out, float(value))
            case 'string':
                write_string(out, str(value))
    return bytes(out)


def encode_record(record: FullFeatureRecord, schema: CodecSchema = DEFAULT_SCHEMA) -> bytes:
    body = encode_body(record, schema)
    out = bytearray(MAGIC)
    out += _FINGERPRINT.pack(schema.fingerprint)
    write_long(out, len(body))
    out += body
    return bytes(out)


def decode_record(data: bytes, schema: CodecSchema = DEFAULT_SCHEMA) -> FullFeatureRecord:
    reader = _Reader(data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CodecError("not a record: bad marker bytes")
    fingerprint = _FINGERPRINT.unpack(reader.take(_FINGERPRINT.size))[0]
    if fingerprint != schema.fingerprint:
        raise SchemaMismatchError(schema.fingerprint, fingerprint)

    body_length = reader.read_long()
    body_end = reader.pos + body_length
    if body_length < 0 or body_end > len(data):
        raise TruncatedRecordError(f"body of {body_length} bytes, only {len(data) - reader.pos} present")

    body = _Reader(data[:body_end], reader.pos)
    values: Dict[str, Any] = {}
    for name, field_type in schema.fields:
        match field_type:
            case 'long':
                values[name] = body.read_long()
            case 'double':
                values[name] = body.read_double()
            case 'string':
                values[name] = body.read_string()
    if body.pos != body_end:
        raise CodecError(f"{body_end - body.pos} unread bytes in record body")
    if body_end != len(data):
        raise CodecError(f"{len(data) - body_end} trailing bytes after record")

    try:
        return record_from_fields(values)
    except (KeyError, TypeError, ValueError) as e:
        raise CodecError(f"decoded values do not form a valid record: {e}") from e
