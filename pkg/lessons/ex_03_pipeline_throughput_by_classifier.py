""" Same replay, unlimited rate, one pipeline run per classifier. Expect the tree family to lead and kNN to trail. """
import pandas as pd

from nids.benchmark import BenchReport, ClassifierCandidate, RunMetadata, recommend_classifier
from nids.classifiers import Algorithm, predict_batch, train
from nids.config import RunConfig
from nids.pipeline import NullSink, run_pipeline
from nids.running import build_training_data
from nids.selection import default_params, evaluate
from sim.traffic import SyntheticTraffic

if __name__ == "__main__":
    seed = 0
    training = build_training_data(SyntheticTraffic.from_defaults(n_sessions=20_000, seed=seed).generate(), seed)
    replay_sessions = [item.session for item in SyntheticTraffic.from_defaults(n_sessions=100_000, seed=1).stream()]
    config = RunConfig.from_defaults()

    rows, candidates = [], []
    for algorithm in (Algorithm.NULL, Algorithm.DT, Algorithm.RF, Algorithm.NB, Algorithm.SVM, Algorithm.KNN):
        model = train(algorithm, training.dataset, default_params(algorithm), verbose=True)
        predicted, _ = predict_batch(model, training.dataset.vectors)
        f1 = evaluate(predicted, training.dataset.labels).f1

        summary = run_pipeline(config, replay_sessions, model, training.spec, sink=NullSink(), verbose=True)
        # unlimited runs are over in seconds, so the throughput is taken per second
        metadata = RunMetadata(classifier=str(algorithm), seed=seed, throughput_interval_s=1.0)
        report = BenchReport.from_summary(summary, metadata)
        rows.append({
            'algorithm': str(algorithm),
            'f1': f1,
            'throughput': report.throughput_sessions_per_s,
            'latency_ms': report.latency_ms,
            'classifier_busy': report.busy_ratios.get('classifier', 0.0),
        })
        if algorithm is not Algorithm.NULL:
            candidates.append(ClassifierCandidate(str(algorithm), f1, report.throughput_sessions_per_s))
        print(rows[-1])

    print(pd.DataFrame(rows).round(3))
    for offered_rate in (1_000, 5_000, 20_000):
        print(f"at {offered_rate} sessions/s use {recommend_classifier(candidates, offered_rate)}")
