import glob
import json
import os

import yaml

from nids.capture import write_packets_jsonl
from nids.cli import EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from nids.pipeline import read_session_log, write_session_log
from nids.tests.factories import make_session
from sim.traffic import SyntheticTraffic, synthetic_packets


def _run_dir(runs_dir, command: str) -> str:
    (run_dir,) = glob.glob(os.path.join(str(runs_dir), f'{command}_*'))
    return run_dir


def _labeled_log(tmp_path, n_sessions: int = 400, seed: int = 0) -> str:
    path = tmp_path / f'labeled_{seed}.jsonl'
    with open(path, 'w') as f:
        write_session_log(SyntheticTraffic.separable_variant(n_sessions=n_sessions, seed=seed).generate(), f)
    return str(path)


def _main(tmp_path, *argv) -> int:
    return main(['--runs-dir', str(tmp_path / 'runs'), *argv])


def test_usage_errors_exit_with_one(tmp_path):
    assert main([]) == EXIT_USAGE
    assert _main(tmp_path, 'train', '--labeled-sessions', 'x.jsonl', '--algo', 'xgboost') == EXIT_USAGE
    assert _main(tmp_path, 'assemble', '--pcap', 'a.pcap', '--packets-jsonl', 'b.jsonl') == EXIT_USAGE
    assert _main(tmp_path, 'bench', '--sessions', 's', '--model', 'm', '--rate', 'fast') == EXIT_USAGE


def test_missing_inputs_exit_with_two(tmp_path):
    missing = str(tmp_path / 'missing.jsonl')
    assert _main(tmp_path, 'label', '--sessions', missing, '--ground-truth', missing) == EXIT_INPUT
    assert _main(tmp_path, 'assemble', '--pcap', missing) == EXIT_INPUT


def test_bad_config_exits_with_two(tmp_path):
    config = tmp_path / 'run.yaml'
    config.write_text('pipeline: {queue_capacity: -1}\n')
    assert _main(tmp_path, '--config', str(config), 'assemble', '--pcap', 'a.pcap') == EXIT_INPUT


def test_assemble(tmp_path):
    packets = tmp_path / 'packets.jsonl'
    with open(packets, 'w') as f:
        write_packets_jsonl(synthetic_packets(n_flows=30, seed=1), f)

    assert _main(tmp_path, '--seed', '3', 'assemble', '--packets-jsonl', str(packets)) == EXIT_OK

    run_dir = _run_dir(tmp_path / 'runs', 'assemble')
    with open(os.path.join(run_dir, 'sessions.jsonl')) as f:
        assert len(read_session_log(f)) == 30
    with open(os.path.join(run_dir, 'assembly_stats.json')) as f:
        assert json.load(f)['sessions'] == 30
    with open(os.path.join(run_dir, 'resolved_config.yaml')) as f:
        assert 'seed: 3' in f.read()
    assert os.path.exists(os.path.join(run_dir, 'run.log'))


def test_label(tmp_path):
    sessions = [
        make_session(1, timestamp_ms=1_000_000, src='175.45.176.1', src_port=4444, dst='149.171.126.10'),
        make_session(2, timestamp_ms=1_000_000, src='175.45.176.2', src_port=4444, dst='149.171.126.10'),
    ]
    sessions_path = tmp_path / 'sessions.jsonl'
    with open(sessions_path, 'w') as f:
        write_session_log(sessions, f)
    truth = tmp_path / 'truth.csv'
    truth.write_text(
        'src,sport,dst,dport,proto,start_time,end_time,attack_cat\n'
        '175.45.176.1,4444,149.171.126.10,80,tcp,1000,1001,Exploits\n'
        'garbage,row,,,,,,\n'
    )
    out = tmp_path / 'labeled.jsonl'

    assert _main(tmp_path, 'label', '--sessions', str(sessions_path), '--ground-truth', str(truth),
                 '--out', str(out)) == EXIT_OK

    with open(out) as f:
        labels = [item.label_or_none for item in read_session_log(f)]
    assert [str(label.label) for label in labels] == ['abnormal', 'normal']
    assert labels[0].attack_category == 'Exploits'
    with open(os.path.join(_run_dir(tmp_path / 'runs', 'label'), 'label_stats.json')) as f:
        assert json.load(f) == {'sessions': 2, 'sessions_matched': 1, 'rows_loaded': 1, 'rows_skipped': 1}


def test_training_is_reproducible(tmp_path):
    labeled = _labeled_log(tmp_path)
    first, second = tmp_path / 'first.msgpack', tmp_path / 'second.msgpack'

    for out in (first, second):
        assert _main(tmp_path, '--seed', '5', 'train', '--labeled-sessions', labeled, '--algo', 'rf',
                     '--params', '{"I": 5}', '--out', str(out)) == EXIT_OK

    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / 'first.spec.json').read_text() == (tmp_path / 'second.spec.json').read_text()


def test_one_point_grid_equals_fixed_params(tmp_path):
    labeled = _labeled_log(tmp_path)
    grid = tmp_path / 'grid.json'
    grid.write_text(json.dumps({'C': [0.3, 0.3, 1], 'M': [4, 4, 1, 'int']}))
    searched, fixed = tmp_path / 'searched.msgpack', tmp_path / 'fixed.msgpack'

    assert _main(tmp_path, 'train', '--labeled-sessions', labeled, '--algo', 'dt', '--search', str(grid),
                 '--out', str(searched)) == EXIT_OK
    assert _main(tmp_path, 'train', '--labeled-sessions', labeled, '--algo', 'dt', '--params', '{"C": 0.3, "M": 4}',
                 '--out', str(fixed)) == EXIT_OK

    assert searched.read_bytes() == fixed.read_bytes()
    run_dirs = sorted(glob.glob(str(tmp_path / 'runs' / 'train_*')))
    assert any(os.path.exists(os.path.join(d, 'search_dt.csv')) for d in run_dirs)


def test_params_and_search_together_is_a_usage_error(tmp_path):
    assert _main(tmp_path, 'train', '--labeled-sessions', 'x', '--algo', 'dt', '--params', '{}',
                 '--search', 'default') == EXIT_USAGE


def test_bench(tmp_path):
    labeled = _labeled_log(tmp_path, n_sessions=200)
    model = tmp_path / 'model.msgpack'
    assert _main(tmp_path, 'train', '--labeled-sessions', labeled, '--algo', 'dt', '--out', str(model)) == EXIT_OK

    out = tmp_path / 'bench'
    assert _main(tmp_path, 'bench', '--sessions', labeled, '--model', str(model), '--rate', '2000',
                 '--runs', '2', '--workers', '3', '--throughput-interval', '0.001',
                 '--out', str(out)) == EXIT_OK

    for run in range(2):
        report = json.loads((out / f'report_run{run}.json').read_text())
        assert list(report)[0] == 'schema_version'
        assert report['metadata']['classifier'] == 'dt'
        assert report['metadata']['rate'] == 2000.0
        assert report['metadata']['sessions'] == 200
        assert len((out / f'sink_run{run}.jsonl').read_text().splitlines()) == 200
        assert (out / f'report_run{run}.csv').exists()
    suite = json.loads((out / 'report.json').read_text())
    assert suite['aggregate']['runs'] == 2
    assert report['metadata']['throughput_interval_s'] == 0.001


def test_bench_too_short_for_one_interval_stops_before_replaying(tmp_path):
    labeled = _labeled_log(tmp_path, n_sessions=200)
    model = tmp_path / 'model.msgpack'
    assert _main(tmp_path, 'train', '--labeled-sessions', labeled, '--algo', 'nb', '--out', str(model)) == EXIT_OK

    # 200 sessions at 1000/s last 0.2s, a 30s interval needs 15s
    out = tmp_path / 'bench'
    assert _main(tmp_path, 'bench', '--sessions', labeled, '--model', str(model), '--rate', '1000',
                 '--out', str(out)) == EXIT_INPUT
    assert not (out / 'sink_run0.jsonl').exists()
    with open(os.path.join(_run_dir(tmp_path / 'runs', 'bench'), 'run.log')) as f:
        assert 'bench.throughput_interval_s' in f.read()


def test_bench_refuses_a_foreign_spec(tmp_path):
    model = tmp_path / 'model.msgpack'
    other = tmp_path / 'other.msgpack'
    assert _main(tmp_path, 'train', '--labeled-sessions', _labeled_log(tmp_path, 200, seed=1), '--algo', 'nb',
                 '--out', str(model)) == EXIT_OK
    assert _main(tmp_path, 'train', '--labeled-sessions', _labeled_log(tmp_path, 200, seed=2), '--algo', 'nb',
                 '--out', str(other)) == EXIT_OK

    assert _main(tmp_path, 'bench', '--sessions', _labeled_log(tmp_path, 50, seed=3), '--model', str(model),
                 '--spec', str(tmp_path / 'other.spec.json'), '--sink', 'null') == EXIT_INPUT


def test_rerun_from_the_recorded_config(tmp_path):
    labeled = _labeled_log(tmp_path)
    first = tmp_path / 'first.msgpack'
    assert _main(tmp_path, '--seed', '5', 'train', '--labeled-sessions', labeled, '--algo', 'rf',
                 '--params', '{"I": 5}', '--out', str(first)) == EXIT_OK

    resolved = os.path.join(_run_dir(tmp_path / 'runs', 'train'), 'resolved_config.yaml')
    with open(resolved) as f:
        recorded = yaml.safe_load(f)
    assert recorded['seed'] == 5
    assert recorded['command']['name'] == 'train'
    assert recorded['command']['args']['algo'] == 'rf'
    assert recorded['command']['args']['params'] == '{"I": 5}'
    assert recorded['command']['args']['labeled_sessions'] == labeled

    assert _main(tmp_path, 'rerun', '--run-config', resolved) == EXIT_OK

    rerun_dir = _run_dir(tmp_path / 'runs', 'rerun')
    with open(os.path.join(rerun_dir, 'model.msgpack'), 'rb') as f:
        assert f.read() == first.read_bytes()
    with open(os.path.join(rerun_dir, 'model.spec.json')) as f:
        assert f.read() == (tmp_path / 'first.spec.json').read_text()


def test_rerun_needs_a_recorded_command(tmp_path):
    config = tmp_path / 'run.yaml'
    config.write_text('seed: 1\n')
    assert _main(tmp_path, 'rerun', '--run-config', str(config)) == EXIT_INPUT
