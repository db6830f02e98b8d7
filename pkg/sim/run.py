import argparse
import logging
import os

from nids.capture import write_packets_jsonl
from nids.pipeline.records import write_session_log
from sim.traffic import SyntheticTraffic, synthetic_packets
from utils.file_utils import DEFAULT_DATA_DIR, ensure_path
from utils.profiling import just_time

logger = logging.getLogger(__name__)


def run_simulation(
    n_sessions: int = 10_000,
    n_flows: int = 300,
    seed: int = 0,
    separable: bool = False,
    out_dir: str = DEFAULT_DATA_DIR,
):
    """ Writes <out_dir>/synthetic_sessions.jsonl (labeled) and <out_dir>/synthetic_packets.jsonl. """
    if separable:
        traffic = SyntheticTraffic.separable_variant(n_sessions=n_sessions, seed=seed)
    else:
        traffic = SyntheticTraffic.from_defaults(n_sessions=n_sessions, seed=seed)

    sessions_path = ensure_path(out_dir, 'synthetic_sessions.jsonl')
    with just_time('generating sessions'), open(sessions_path, 'w') as f:
        n_written = write_session_log(traffic.stream(), f)
    logger.info(f"wrote {n_written} labeled sessions to {sessions_path}")

    packets_path = ensure_path(out_dir, 'synthetic_packets.jsonl')
    with just_time('generating packets'), open(packets_path, 'w') as f:
        n_written = write_packets_jsonl(synthetic_packets(n_flows=n_flows, seed=seed), f)
    logger.info(f"wrote {n_written} packets to {packets_path}")
    return sessions_path, packets_path


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO)
    parser = argparse.ArgumentParser(description='Write synthetic traffic for the nids tools.')
    parser.add_argument('--sessions', type=int, default=10_000)
    parser.add_argument('--flows', type=int, default=300)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--separable', action='store_true')
    parser.add_argument('--out-dir', default=DEFAULT_DATA_DIR)
    args = parser.parse_args()
    run_simulation(args.sessions, args.flows, args.seed, args.separable, os.path.abspath(args.out_dir))
