""" Command line surface.

    python -m nids assemble --pcap capture.pcap --out sessions.jsonl
    python -m nids label --sessions sessions.jsonl --ground-truth gt.csv --out labeled.jsonl
    python -m nids train --labeled-sessions labeled.jsonl --algo dt --search grid.json --seed 0 --out model.msgpack
    python -m nids bench --sessions sessions.jsonl --model model.msgpack --rate 500 --runs 3
    python -m nids rerun --run-config runs/train_<...>/resolved_config.yaml

Each invocation gets its own run directory holding resolved_config.yaml (the config plus the command and its
arguments), run.log and the artifacts.
Exit codes: 0 success, 1 usage error, 2 input / config / format error, 3 internal error.
"""
import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Tuple

import attr

from nids.classifiers import Algorithm
from nids.config import UNLIMITED, CommandRecord, RunConfig, SinkKind
from nids.errors import ConfigError, InvariantViolation, NidsError
from nids.running import assemble_sessions, bench, label_sessions, train_model, write_json
from nids.selection import DEFAULT_GRIDS, GridSpec
from utils.file_utils import DEFAULT_RUNS_DIR, make_run_dir

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

_LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class UsageError(Exception):
    ...


class _ArgumentParser(argparse.ArgumentParser):
    """ argparse exits with 2 on bad usage; we reserve 2 for input errors. """

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _rate(raw: str):
    if raw == UNLIMITED:
        return raw
    try:
        rate = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"rate must be a number or {UNLIMITED!r}, got {raw!r}")
    if rate <= 0:
        raise argparse.ArgumentTypeError(f"rate must be > 0, got {raw}")
    return rate


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='nids', description='Streaming session classification and benchmarking.')
    parser.add_argument('--config', help='YAML run config; flags override it')
    parser.add_argument('--seed', type=int, help='root seed for every random choice')
    parser.add_argument('--runs-dir', default=DEFAULT_RUNS_DIR, help='where per-run output directories are made')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--include-current', action='store_true', default=None,
                        help='host features count the session itself')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_ArgumentParser)

    p = commands.add_parser('assemble', help='packets -> session log')
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--pcap')
    source.add_argument('--packets-jsonl')
    p.add_argument('--out', help='session log path, default <run dir>/sessions.jsonl')

    p = commands.add_parser('label', help='attach ground-truth labels to a session log')
    p.add_argument('--sessions', required=True)
    p.add_argument('--ground-truth', required=True)
    p.add_argument('--out', help='default <run dir>/labeled_sessions.jsonl')

    p = commands.add_parser('train', help='fit a classifier, optionally with a grid search')
    p.add_argument('--labeled-sessions', required=True)
    p.add_argument('--algo', required=True, choices=[str(a) for a in Algorithm])
    how = p.add_mutually_exclusive_group()
    how.add_argument('--params', help='JSON object, field names or grid letters, e.g. \'{"C": 0.47, "M": 1}\'')
    how.add_argument('--search', help='grid JSON file {"C": [0.01, 0.99, 99], ...}, or "default" for the built-in grid')
    p.add_argument('--max-grid-points', type=int, help='shrink the grid to at most this many points')
    p.add_argument('--workers', type=int, default=1, help='grid points trained in parallel')
    p.add_argument('--out', help='model path, default <run dir>/model.msgpack')

    p = commands.add_parser('bench', help='replay sessions through the pipeline and measure it')
    p.add_argument('--sessions', required=True)
    p.add_argument('--model', required=True)
    p.add_argument('--spec', help='normalization spec, default next to the model')
    p.add_argument('--rate', type=_rate, help=f'sessions per second or {UNLIMITED!r}')
    p.add_argument('--runs', type=int, default=1)
    p.add_argument('--workers', type=int, help='classifier worker count')
    p.add_argument('--queue-capacity', type=int)
    p.add_argument('--sink', choices=[str(k) for k in SinkKind])
    p.add_argument('--throughput-interval', type=float, help='throughput interval in seconds, default 30')
    p.add_argument('--out', help='report directory, default the run directory')

    p = commands.add_parser('rerun', help='repeat a recorded run from its resolved_config.yaml')
    p.add_argument('--run-config', required=True, help='resolved_config.yaml of an earlier run')
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_yaml_path(args.config) if args.config else RunConfig.from_defaults()
    overrides: Dict[str, Any] = {
        'seed': args.seed,
        'include_current_session': args.include_current,
    }
    if args.command == 'bench':
        overrides.update({
            'pipeline.replay_rate': args.rate,
            'pipeline.classifier_worker_count': args.workers,
            'pipeline.queue_capacity': args.queue_capacity,
            'pipeline.sink_kind': args.sink,
            'bench.throughput_interval_s': args.throughput_interval,
        })
    return config.with_overrides(**overrides)


# global flags already live in RunConfig
_NOT_RECORDED = frozenset({'command', 'config', 'runs_dir', 'log_level', 'seed', 'include_current'})
_PATH_ARGS = frozenset({
    'pcap', 'packets_jsonl', 'sessions', 'ground_truth', 'labeled_sessions', 'model', 'spec', 'search', 'out',
})


def record_command(args: argparse.Namespace) -> CommandRecord:
    """ Input and output paths are made absolute so a rerun works from any directory. """
    recorded = {}
    for key, value in sorted(vars(args).items()):
        if key in _NOT_RECORDED:
            continue
        if key in _PATH_ARGS and isinstance(value, str) and value != 'default':
            value = os.path.abspath(value)
        recorded[key] = value
    return CommandRecord(name=args.command, args=recorded)


def resolve_run(args: argparse.Namespace) -> Tuple[RunConfig, argparse.Namespace]:
    """ The config to run with and the command arguments to run. A rerun takes both from the recorded file,
    with outputs going to the new run directory. """
    if args.command != 'rerun':
        config = resolve_config(args)
        return attr.evolve(config, command=record_command(args)), args

    config = RunConfig.from_yaml_path(args.run_config)
    if config.command is None or config.command.name == 'rerun':
        raise ConfigError(f"{args.run_config} records no command to repeat")
    recorded = argparse.Namespace(**{**config.command.args, 'out': None}, command=config.command.name)
    return config, recorded


def _setup_logging(level: str, run_dir: str):
    root = logging.getLogger()
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    for handler in (logging.StreamHandler(sys.stderr), logging.FileHandler(os.path.join(run_dir, 'run.log'))):
        handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        root.addHandler(handler)


def _load_grid(raw: str, algorithm: Algorithm, max_points: Optional[int]) -> GridSpec:
    if raw == 'default':
        grid = DEFAULT_GRIDS[algorithm]
    else:
        with open(raw) as f:
            grid = GridSpec.from_dict(json.load(f))
    return grid.subsample(max_points) if max_points else grid


def run_command(args: argparse.Namespace, config: RunConfig, run_dir: str):
    match args.command:
        case 'assemble':
            outcome = assemble_sessions(
                out_path=args.out or os.path.join(run_dir, 'sessions.jsonl'),
                config=config.assembler,
                pcap_path_or_none=args.pcap,
                packets_jsonl_path_or_none=args.packets_jsonl,
            )
            write_json(os.path.join(run_dir, 'assembly_stats.json'), outcome.to_dict())

        case 'label':
            stats = label_sessions(
                sessions_path=args.sessions,
                ground_truth_path=args.ground_truth,
                out_path=args.out or os.path.join(run_dir, 'labeled_sessions.jsonl'),
            )
            write_json(os.path.join(run_dir, 'label_stats.json'), {
                'sessions': stats.sessions,
                'sessions_matched': stats.sessions_matched,
                'rows_loaded': stats.rows_loaded,
                'rows_skipped': stats.rows_skipped,
            })

        case 'train':
            algorithm = Algorithm(args.algo)
            outcome = train_model(
                labeled_sessions_path=args.labeled_sessions,
                algorithm=algorithm,
                model_path=args.out or os.path.join(run_dir, 'model.msgpack'),
                seed=config.seed,
                params_or_none=json.loads(args.params) if args.params else None,
                grid_or_none=_load_grid(args.search, algorithm, args.max_grid_points) if args.search else None,
                include_current=config.include_current_session,
                search_dir_or_none=run_dir,
                workers=args.workers,
            )
            write_json(os.path.join(run_dir, 'train_stats.json'), outcome.stats())

        case 'bench':
            bench(
                sessions_path=args.sessions,
                model_path=args.model,
                config=config,
                out_dir=args.out or run_dir,
                runs=args.runs,
                spec_path_or_none=args.spec,
            )


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE

    try:
        run_dir = make_run_dir(args.command, where=args.runs_dir)
    except OSError as e:
        print(f"cannot create a run directory under {args.runs_dir}: {e}", file=sys.stderr)
        return EXIT_INPUT

    _setup_logging(args.log_level, run_dir)
    logger.info(f"run directory {run_dir}")

    try:
        config, command_args = resolve_run(args)
        config.write_resolved(os.path.join(run_dir, 'resolved_config.yaml'))
        logger.info(f"running {config.command.name} with {config.command.args}")
        run_command(command_args, config, run_dir)
    except InvariantViolation:
        logger.exception("internal invariant violated")
        return EXIT_INTERNAL
    except (NidsError, OSError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INPUT
    except Exception:
        logger.exception("unexpected internal error")
        return EXIT_INTERNAL
    return EXIT_OK
