import pandas as pd

from nids.benchmark import BenchReport, RunMetadata, find_saturation_rate, ramp_rates
from nids.classifiers import Algorithm, train
from nids.config import RunConfig
from nids.pipeline import NullSink, run_pipeline
from nids.running import build_training_data
from nids.selection import default_params
from sim.traffic import SyntheticTraffic

SECONDS_PER_STEP = 40   # long enough for one full throughput interval

if __name__ == "__main__":
    seed = 0
    training = build_training_data(SyntheticTraffic.from_defaults(n_sessions=20_000, seed=seed).generate(), seed)
    model = train(Algorithm.KNN, training.dataset, default_params(Algorithm.KNN))

    rows = []
    for rate in ramp_rates(250, 4_000, 6):
        n_sessions = int(rate * SECONDS_PER_STEP)
        sessions = [item.session for item in SyntheticTraffic.from_defaults(n_sessions=n_sessions, seed=1).stream()]
        config = RunConfig.from_defaults().with_overrides(**{'pipeline.replay_rate': rate})

        summary = run_pipeline(config, sessions, model, training.spec, sink=NullSink())
        report = BenchReport.from_summary(summary, RunMetadata(classifier='knn', rate=rate, seed=seed))
        rows.append({
            'rate': rate,
            'throughput': report.throughput_sessions_per_s,
            'latency_ms': report.latency_ms,
            **{f'busy.{stage}': ratio for stage, ratio in report.busy_ratios.items() if '[' not in stage},
        })
        print(rows[-1])

    data = pd.DataFrame(rows)
    print(data.round(3))
    print(f"saturation rate: {find_saturation_rate(list(zip(data['rate'], data['throughput'])))}")
