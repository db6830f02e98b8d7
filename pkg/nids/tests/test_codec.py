import struct

import pytest

from nids.codec import (
    DEFAULT_SCHEMA, MAGIC, CodecSchema, FULL_FEATURE_FIELDS, decode_record, encode_record, rabin_fingerprint,
    write_double, write_long, write_string,
)
from nids.errors import CodecError, SchemaMismatchError, TruncatedRecordError
from nids.host_features import FullFeatureRecord, HostFeatures, HostWindowState
from nids.tests.factories import make_session, random_sessions


def _record(**session_overrides) -> FullFeatureRecord:
    return FullFeatureRecord(make_session(**session_overrides), HostFeatures(3, 1, 2, 5, 1))


@pytest.mark.parametrize('value, expected', [
    (0, b'\x00'),
    (-1, b'\x01'),
    (1, b'\x02'),
    (-64, b'\x7f'),
    (64, b'\x80\x01'),
    (300, b'\xd8\x04'),
    (-300, b'\xd7\x04'),
])
def test_long_encoding(value, expected):
    out = bytearray()
    write_long(out, value)
    assert bytes(out) == expected


def test_string_and_double_encoding():
    out = bytearray()
    write_string(out, 'foo')
    write_double(out, 1.5)
    assert bytes(out) == b'\x06foo' + struct.pack('<d', 1.5)


def test_rabin_fingerprint_of_a_known_schema():
    assert rabin_fingerprint(b'"null"') == 7195948357588979594


def test_header_layout():
    data = encode_record(_record())
    assert data[:2] == MAGIC
    assert struct.unpack('<Q', data[2:10])[0] == DEFAULT_SCHEMA.fingerprint


def test_records_survive_the_codec():
    sessions = random_sessions(300, seed=13)
    for record in HostWindowState().extract_all(sessions):
        assert decode_record(encode_record(record)) == record


def test_unusual_values_survive_the_codec():
    record = _record(session_id=2 ** 40, duration_s=0.0, src_bytes=0, service='ünïcode', src='::1', dst='fe80::1')
    assert decode_record(encode_record(record)) == record


def test_other_schema_is_rejected():
    other = CodecSchema(name='Other', fields=FULL_FEATURE_FIELDS[:-1])
    with pytest.raises(SchemaMismatchError) as info:
        decode_record(encode_record(_record()), other)
    assert info.value.expected_fingerprint == other.fingerprint


def test_every_truncation_is_detected():
    data = encode_record(_record())
    for cut in range(len(data)):
        with pytest.raises(CodecError):
            decode_record(data[:cut])


def test_truncated_body_is_a_truncation_error():
    data = encode_record(_record())
    with pytest.raises(TruncatedRecordError):
        decode_record(data[:-3])


def test_trailing_bytes_and_bad_magic_are_rejected():
    data = encode_record(_record())
    with pytest.raises(CodecError):
        decode_record(data + b'\x00')
    with pytest.raises(CodecError):
        decode_record(b'\xc3\x02' + data[2:])


def test_fingerprint_depends_on_field_order():
    swapped = (FULL_FEATURE_FIELDS[1], FULL_FEATURE_FIELDS[0], *FULL_FEATURE_FIELDS[2:])
    assert CodecSchema(name='FullFeatureRecord', fields=swapped).fingerprint != DEFAULT_SCHEMA.fingerprint


def test_unsupported_field_types_are_rejected():
    with pytest.raises(ValueError):
        CodecSchema(name='Bad', fields=(('x', 'boolean'),))
