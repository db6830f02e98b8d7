import pandas as pd

from nids.classifiers import Algorithm
from nids.running import build_training_data, named_seed
from nids.selection import DEFAULT_GRIDS, compare_defaults_vs_tuned, stratified_split
from sim.traffic import SyntheticTraffic

MAX_GRID_POINTS = 24   # the full DT grid alone is 990 points

if __name__ == "__main__":
    seed = 0
    items = SyntheticTraffic.from_defaults(n_sessions=20_000, seed=seed).generate()
    data = build_training_data(items, seed)
    train_set, validation = stratified_split(data.dataset, named_seed(seed, 'split'))
    print(f"{len(train_set)} train / {len(validation)} validation vectors, dimension {train_set.dimension}")

    rows = []
    for algorithm in (Algorithm.DT, Algorithm.RF, Algorithm.NB, Algorithm.SVM, Algorithm.KNN):
        grid = DEFAULT_GRIDS[algorithm].subsample(MAX_GRID_POINTS)
        result = compare_defaults_vs_tuned(algorithm, grid, train_set, validation, named_seed(seed, 'model'), workers=4)
        rows.append({
            'algorithm': str(algorithm),
            'default_f1': result.default_f1,
            'tuned_f1': result.tuned_f1,
            'tuned_params': result.tuned_params,
        })
        print(rows[-1])

    print(pd.DataFrame(rows).round(4))
