import io

import pytest

from nids.errors import GroundTruthFormatError
from nids.ground_truth import GroundTruth
from nids.tests.factories import make_session
from nids.types import Label, Protocol

ATTACKER, VICTIM = '175.45.176.1', '149.171.126.10'

HEADER = 'src,sport,dst,dport,proto,start_time,end_time,attack_cat\n'


def _truth(*rows: str) -> GroundTruth:
    return GroundTruth.from_csv(io.StringIO(HEADER + ''.join(row + '\n' for row in rows)))


def _session(start_s: float, duration_s: float = 2.0, **overrides):
    fields = dict(src=ATTACKER, src_port=4444, dst=VICTIM, dst_port=80)
    fields.update(overrides)
    return make_session(timestamp_ms=int(round(start_s * 1000)), duration_s=duration_s, **fields)


def test_overlapping_session_is_abnormal_with_its_category():
    truth = _truth(f'{ATTACKER},4444,{VICTIM},80,tcp,1000,1010,Exploits')
    label = truth.label(_session(1005))

    assert label.label is Label.ABNORMAL
    assert label.attack_category == 'Exploits'
    assert truth.stats.sessions_matched == 1


def test_reverse_orientation_matches():
    truth = _truth(f'{VICTIM},80,{ATTACKER},4444,tcp,1000,1010,DoS')
    assert truth.label(_session(1005)).label is Label.ABNORMAL


@pytest.mark.parametrize('start_s, duration_s, matched', [
    (1011.0, 0.5, True),     # starts exactly one second after the row ends
    (1011.001, 0.5, False),
    (997.0, 2.0, True),      # ends exactly one second before the row starts
    (996.0, 2.0, False),
])
def test_one_second_tolerance_is_inclusive(start_s, duration_s, matched):
    truth = _truth(f'{ATTACKER},4444,{VICTIM},80,tcp,1000,1010,Fuzzers')
    label = truth.label(_session(start_s, duration_s))
    assert (label.label is Label.ABNORMAL) == matched


def test_other_flows_are_normal():
    truth = _truth(f'{ATTACKER},4444,{VICTIM},80,tcp,1000,1010,Exploits')

    assert truth.label(_session(1005, src_port=4445)).label is Label.NORMAL
    assert truth.label(_session(1005, protocol=Protocol.UDP, service='dns')).label is Label.NORMAL
    assert truth.label(_session(1005)).attack_category == 'Exploits'
    assert (truth.stats.sessions, truth.stats.sessions_matched) == (3, 1)


def test_hex_ports_and_empty_categories():
    truth = _truth(f'{ATTACKER},0x115c,{VICTIM},0x0050,tcp,1000,1010,')
    label = truth.label(_session(1005))
    assert label.label is Label.ABNORMAL
    assert label.attack_category is None


def test_icmp_rows_ignore_ports():
    truth = _truth(f'{ATTACKER},0,{VICTIM},0,icmp,1000,1010,Reconnaissance')
    session = _session(1005, src_port=0, dst_port=0, protocol=Protocol.ICMP, service='other')
    assert truth.label(session).label is Label.ABNORMAL


def test_malformed_rows_are_counted_and_skipped():
    truth = _truth(
        f'{ATTACKER},4444,{VICTIM},80,tcp,1000,1010,Exploits',
        f'{ATTACKER},not-a-port,{VICTIM},80,tcp,1000,1010,Exploits',
        f'not-an-address,4444,{VICTIM},80,tcp,1000,1010,Exploits',
        f'{ATTACKER},4444,{VICTIM},80,sctp,1000,1010,Exploits',
        f'{ATTACKER},4444,{VICTIM},80,tcp,1010,1000,Exploits',
        f'{ATTACKER},4444,{VICTIM},80,tcp,1000,1010,Exploits,EXTRA',
        f'{ATTACKER},4444,{VICTIM}',
        f'{ATTACKER},5555,{VICTIM},80,tcp,2000,2010,DoS',
    )
    assert truth.stats.rows_loaded == 2
    assert truth.stats.rows_skipped == 6


def test_missing_columns_are_fatal():
    with pytest.raises(GroundTruthFormatError):
        GroundTruth.from_csv(io.StringIO('src,sport,dst,dport\n1.2.3.4,1,5.6.7.8,2\n'))


def test_label_all_keeps_order():
    truth = _truth(f'{ATTACKER},4444,{VICTIM},80,tcp,1000,1010,Exploits')
    sessions = [_session(1005), _session(5000), _session(1009)]
    labels = [item.label_or_none.label for item in truth.label_all(sessions)]
    assert labels == [Label.ABNORMAL, Label.NORMAL, Label.ABNORMAL]


def test_iso_timestamps_are_utc():
    truth = _truth(f'{ATTACKER},4444,{VICTIM},80,TCP,1970-01-01T00:16:40,1970-01-01T00:16:50,Fuzzers')
    assert truth.stats.rows_loaded == 1
    assert truth.label(_session(1005)).attack_category == 'Fuzzers'
