""" The workflows behind the command line: assemble, label, train, bench. """
import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import attr

from nids.assembler import AssemblyStats, assemble
from nids.benchmark import BenchReport, RunMetadata, aggregate_reports, check_run_length, emit_report, emit_suite
from nids.capture import CaptureStats, PcapReadResult, read_packets_jsonl, read_pcap
from nids.classifiers import Algorithm, Dataset, load_model_file, params_from_dict, predict_batch, save_model_file, train
from nids.classifiers.params import params_to_dict
from nids.config import AssemblerConfig, RunConfig
from nids.errors import EmptyInputError
from nids.ground_truth import GroundTruth, LabelingStats
from nids.host_features import FullFeatureRecord, HostWindowState
from nids.normalization import NormalizationSpec, encode_all, fit_normalization
from nids.pipeline import read_session_log, run_pipeline, write_session_log
from nids.selection import GridSpec, SearchResult, downsample, evaluate, grid_search, stratified_split, with_seed
from nids.types import ClassLabel, LabeledSession
from utils.file_utils import ensure_path
from utils.profiling import just_time

logger = logging.getLogger(__name__)

SPEC_SUFFIX = '.spec.json'


def named_seed(seed: int, stream: str) -> int:
    """ Independent, reproducible sub-seed per consumer (downsample, split, bootstrap, ...). """
    digest = hashlib.sha256(f"{seed}:{stream}".encode()).digest()
    return int.from_bytes(digest[:4], 'little')


def spec_path_for(model_path: str) -> str:
    return os.path.splitext(model_path)[0] + SPEC_SUFFIX


def write_json(path: str, data: Dict[str, Any]) -> str:
    path = ensure_path(path)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
    return path


# ---------------------------------------------------------------------------------------------------------------------
# assemble

@attr.define
class AssembleOutcome:
    sessions_path: str
    sessions: int
    capture_stats: CaptureStats
    assembly_stats: AssemblyStats

    def to_dict(self) -> Dict[str, Any]:
        return {
            'sessions': self.sessions,
            'packets_accepted': self.capture_stats.accepted,
            'packets_skipped': dict(self.capture_stats.skipped),
            'capture_truncated': self.capture_stats.truncated,
            'packets_out_of_order': self.assembly_stats.packets_out_of_order,
            'terminations': dict(self.assembly_stats.terminations),
        }


def read_packets(pcap_path_or_none: Optional[str], packets_jsonl_path_or_none: Optional[str]) -> PcapReadResult:
    if (pcap_path_or_none is None) == (packets_jsonl_path_or_none is None):
        raise ValueError("give exactly one of a pcap file or a packet-event JSONL file")
    if pcap_path_or_none is not None:
        with open(pcap_path_or_none, 'rb') as f:
            return read_pcap(f)
    with open(packets_jsonl_path_or_none) as f:
        return read_packets_jsonl(f)


def assemble_sessions(
    out_path: str,
    config: AssemblerConfig,
    pcap_path_or_none: Optional[str] = None,
    packets_jsonl_path_or_none: Optional[str] = None,
) -> AssembleOutcome:
    with just_time('reading packets'):
        packets = read_packets(pcap_path_or_none, packets_jsonl_path_or_none)
    with just_time('assembling sessions'):
        sessions, assembly_stats = assemble(packets.events, config)

    out_path = ensure_path(out_path)
    with open(out_path, 'w') as f:
        write_session_log(sessions, f)
    logger.info(f"{len(packets.events)} packets -> {len(sessions)} sessions in {out_path}")
    return AssembleOutcome(out_path, len(sessions), packets.stats, assembly_stats)


# ---------------------------------------------------------------------------------------------------------------------
# label

def label_sessions(sessions_path: str, ground_truth_path: str, out_path: str) -> LabelingStats:
    truth = GroundTruth.from_csv(ground_truth_path)
    with open(sessions_path) as f:
        sessions = [item.session for item in read_session_log(f)]

    out_path = ensure_path(out_path)
    with open(out_path, 'w') as f:
        write_session_log(truth.label_all(sessions), f)

    stats = truth.stats
    logger.info(f"labeled {stats.sessions} sessions, {stats.sessions_matched} matched an attack row")
    return stats


# ---------------------------------------------------------------------------------------------------------------------
# train

@attr.define
class TrainingData:
    """ Balanced, encoded training set plus the spec it was encoded with. """
    spec: NormalizationSpec
    dataset: Dataset
    unlabeled_skipped: int


def build_training_data(
    items: Sequence[LabeledSession],
    seed: int,
    include_current: bool = False,
) -> TrainingData:
    """ Host features in stream order, spec fitted on every labeled record, then class balancing. """
    window = HostWindowState(include_current=include_current)
    records: List[FullFeatureRecord] = []
    labels: List[ClassLabel] = []
    skipped = 0
    for item in items:
        record = FullFeatureRecord(item.session, window.update_and_extract(item.session))
        if item.label_or_none is None:
            skipped += 1
            continue
        records.append(record)
        labels.append(item.label_or_none)

    if not records:
        raise EmptyInputError("no labeled sessions to train on")
    if skipped:
        logger.warning(f"{skipped} unlabeled sessions left out of training")

    spec = fit_normalization(records)
    dataset = Dataset.from_class_labels(encode_all(records, spec), labels, spec.spec_version)
    return TrainingData(spec, downsample(dataset, named_seed(seed, 'downsample')), skipped)


@attr.define
class TrainOutcome:
    model_path: str
    spec_path: str
    params: Dict[str, Any]
    train_time_s: float
    training_f1: float
    search_or_none: Optional[SearchResult] = None

    def stats(self) -> Dict[str, Any]:
        return {
            'model_path': self.model_path,
            'spec_path': self.spec_path,
            'params': self.params,
            'train_time_s': self.train_time_s,
            'training_f1': self.training_f1,
            'best_validation_f1': None if self.search_or_none is None else self.search_or_none.best_f1,
        }


def train_model(
    labeled_sessions_path: str,
    algorithm: Algorithm,
    model_path: str,
    seed: int,
    params_or_none: Optional[Dict[str, Any]] = None,
    grid_or_none: Optional[GridSpec] = None,
    include_current: bool = False,
    search_dir_or_none: Optional[str] = None,
    workers: int = 1,
    verbose: bool = False,
) -> TrainOutcome:
    """ Either fixed params or a grid search; the final model is always fit on the whole balanced set. """
    algorithm = Algorithm(algorithm)
    if params_or_none is not None and grid_or_none is not None:
        raise ValueError("give either params or a search grid, not both")

    with open(labeled_sessions_path) as f:
        data = build_training_data(read_session_log(f), seed, include_current)

    model_seed = named_seed(seed, 'model')
    search_or_none = None
    point = dict(params_or_none or {})
    if grid_or_none is not None:
        fit_set, validation = stratified_split(data.dataset, named_seed(seed, 'split'))
        search_or_none = grid_search(algorithm, grid_or_none, fit_set, validation, model_seed, workers, verbose)
        if search_dir_or_none is not None:
            search_or_none.write(search_dir_or_none)
        point = dict(search_or_none.best_params)

    params = params_from_dict(algorithm, with_seed(algorithm, point, model_seed))
    model = train(algorithm, data.dataset, params, verbose=verbose)
    predicted, _ = predict_batch(model, data.dataset.vectors)

    model_path = save_model_file(model, model_path)
    spec_path = data.spec.save(spec_path_for(model_path))
    return TrainOutcome(
        model_path=model_path,
        spec_path=spec_path,
        params=params_to_dict(params),
        train_time_s=model.metadata.train_time_s,
        training_f1=evaluate(predicted, data.dataset.labels).f1,
        search_or_none=search_or_none,
    )


# ---------------------------------------------------------------------------------------------------------------------
# bench

def bench(
    sessions_path: str,
    model_path: str,
    config: RunConfig,
    out_dir: str,
    runs: int = 1,
    spec_path_or_none: Optional[str] = None,
    verbose: bool = False,
) -> Tuple[List[BenchReport], str]:
    """ Replays the session log `runs` times through the pipeline and writes one report per run plus a suite file. """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")

    spec = NormalizationSpec.load(spec_path_or_none or spec_path_for(model_path))
    model = load_model_file(model_path, expected_spec_version=spec.spec_version)
    with open(sessions_path) as f:
        sessions = [item.session for item in read_session_log(f)]
    if not sessions:
        raise EmptyInputError(f"{sessions_path} holds no sessions")
    check_run_length(len(sessions), config.pipeline.get_rate_or_none(), config.bench.throughput_interval_s)

    metadata = RunMetadata(
        classifier=str(model.metadata.algorithm),
        params=dict(model.metadata.params),
        rate=config.pipeline.get_rate_or_none(),
        seed=config.seed,
        classifier_worker_count=config.pipeline.classifier_worker_count,
        throughput_interval_s=config.bench.throughput_interval_s,
        latency_interval_s=config.bench.latency_interval_s,
    )

    reports = []
    for run in range(runs):
        pipeline_config = config.pipeline
        if pipeline_config.sink_path is None:
            pipeline_config = attr.evolve(pipeline_config, sink_path=os.path.join(out_dir, f'sink_run{run}.jsonl'))
        run_config = attr.evolve(config, pipeline=pipeline_config)

        with just_time(f'bench run {run + 1}/{runs}'):
            summary = run_pipeline(run_config, sessions, model, spec, verbose=verbose)
        report = BenchReport.from_summary(summary, metadata)
        reports.append(report)

        for fmt in ('json', 'csv'):
            with open(ensure_path(out_dir, f'report_run{run}.{fmt}'), 'wb') as f:
                f.write(emit_report(report, fmt))
        write_json(os.path.join(out_dir, f'summary_run{run}.json'), summary.to_dict())
        logger.info(
            f"run {run}: {report.throughput_sessions_per_s:.1f} sessions/s, latency {report.latency_ms:.2f} ms"
        )

    suite_path = ensure_path(out_dir, 'report.json')
    with open(suite_path, 'wb') as f:
        f.write(emit_suite(reports))
    if runs > 1:
        aggregate = aggregate_reports(reports)
        logger.info(
            f"{runs} runs: throughput mean {aggregate.throughput_sessions_per_s.mean:.1f} sessions/s, "
            f"latency mean {aggregate.latency_ms.mean:.2f} ms"
        )
    return reports, suite_path
