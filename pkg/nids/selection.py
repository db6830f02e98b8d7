""" Class balancing, grid search over hyperparameters, and F1 evaluation.

Validation protocol: one seeded 70/30 stratified split of the balanced training data.
"""
import concurrent.futures
import itertools
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import attr
import numpy as np
import pandas as pd
from tqdm import tqdm

from nids.classifiers import Algorithm, Dataset, Params, params_from_dict, predict_batch, train
from nids.classifiers.params import PARAMS_TYPES
from nids.errors import (
    DimensionMismatchError, EmptyInputError, NidsError, SpecVersionMismatchError, TrainingError,
)
from nids.types import ClassLabel
from utils.file_utils import mkdir_p

logger = logging.getLogger(__name__)

VALIDATION_FRACTION = 0.3

_REAL_DECIMALS = 12


@attr.frozen
class GridParam:
    name: str          # field name or grid letter, see nids.classifiers.params.GRID_ALIASES
    first: float
    last: float
    count: int
    integer: bool = False

    def __attrs_post_init__(self):
        if self.count < 1:
            raise ValueError(f"{self.name}: count must be >= 1, got {self.count}")
        if self.first > self.last:
            raise ValueError(f"{self.name}: first {self.first} > last {self.last}")

    @classmethod
    def fixed(cls, name: str, value: Union[int, float, bool]) -> 'GridParam':
        return cls(name, float(value), float(value), 1, integer=isinstance(value, (bool, int)))

    def values(self) -> List[Union[int, float]]:
        """ count evenly spaced values from first to last inclusive; integers are rounded and deduplicated. """
        if self.count == 1:
            raw = [self.first]
        else:
            step = (self.last - self.first) / (self.count - 1)
            raw = [self.first + i * step for i in range(self.count)]
            raw[-1] = self.last

        if not self.integer:
            return [round(v, _REAL_DECIMALS) for v in raw]

        values = []
        for v in raw:
            rounded = int(np.floor(v + 0.5))
            if rounded not in values:
                values.append(rounded)
        return values


@attr.frozen
class GridSpec:
    params: Tuple[GridParam, ...]

    @classmethod
    def build(cls, *params: GridParam) -> 'GridSpec':
        return cls(params=tuple(params))

    @classmethod
    def from_dict(cls, data: Dict[str, Sequence]) -> 'GridSpec':
        """ {'C': [0.01, 0.99, 99], 'M': [1, 100, 10, 'int']} """
        params = []
        for name, triple in data.items():
            first, last, count, *flags = triple
            params.append(GridParam(name, float(first), float(last), int(count), integer='int' in flags))
        return cls(params=tuple(params))

    def size(self) -> int:
        return int(np.prod([len(p.values()) for p in self.params])) if self.params else 1

    def subsample(self, max_points: int) -> 'GridSpec':
        """ Shrinks each axis (keeping both ends) until the grid has at most max_points points. """
        params = list(self.params)
        while GridSpec(tuple(params)).size() > max_points:
            widest = max(range(len(params)), key=lambda i: len(params[i].values()))
            p = params[widest]
            if len(p.values()) <= 1:
                break
            params[widest] = attr.evolve(p, count=max(1, (p.count + 1) // 2))
        return GridSpec(tuple(params))


def make_grid(spec: GridSpec) -> List[Dict[str, Union[int, float]]]:
    """ Cartesian product in table order, the last parameter varying fastest. """
    names = [p.name for p in spec.params]
    return [dict(zip(names, combo)) for combo in itertools.product(*(p.values() for p in spec.params))]


DEFAULT_GRIDS: Dict[Algorithm, GridSpec] = {
    Algorithm.DT: GridSpec.build(GridParam('C', 0.01, 0.99, 99), GridParam('M', 1, 100, 10, integer=True)),
    Algorithm.RF: GridSpec.build(
        GridParam('I', 50, 500, 10, integer=True),
        GridParam('N', 2, 5, 4, integer=True),
        GridParam('V', 1e-5, 0.01, 5),
    ),
    Algorithm.NB: GridSpec.build(GridParam.fixed('D', True)),
    Algorithm.SVM: GridSpec.build(
        GridParam('K', 0, 3, 4, integer=True),
        GridParam('D', 1, 5, 5, integer=True),
        GridParam('C', 0.1, 10, 100),
    ),
    Algorithm.KNN: GridSpec.build(GridParam('K', 2, 100, 99, integer=True), GridParam.fixed('I', True)),
}


def default_params(algorithm: Algorithm) -> Params:
    return PARAMS_TYPES[Algorithm(algorithm)]()


# ---------------------------------------------------------------------------------------------------------------------
# balancing and splitting

def downsample(data: Dataset, seed: int) -> Dataset:
    """ Majority class subsampled without replacement to the minority count, then shuffled. """
    counts = data.class_counts()
    if np.any(counts == 0):
        raise EmptyInputError(f"downsampling needs both classes, got class counts {counts.tolist()}")

    rng = np.random.default_rng(seed)
    minority = int(np.argmin(counts))
    keep = int(counts[minority])
    minority_rows = np.flatnonzero(data.labels == minority)
    majority_rows = np.flatnonzero(data.labels != minority)
    chosen = rng.choice(majority_rows, size=keep, replace=False)
    rows = rng.permutation(np.concatenate([minority_rows, chosen]))
    logger.info(f"downsampled {len(data)} -> {len(rows)} vectors ({keep} per class)")
    return data.subset(rows)


def stratified_split(data: Dataset, seed: int, validation_fraction: float = VALIDATION_FRACTION) -> Tuple[Dataset, Dataset]:
    rng = np.random.default_rng(seed)
    train_rows, validation_rows = [], []
    for label in (0, 1):
        rows = rng.permutation(np.flatnonzero(data.labels == label))
        n_validation = int(round(len(rows) * validation_fraction))
        if len(rows) >= 2:
            n_validation = min(max(n_validation, 1), len(rows) - 1)
        validation_rows.append(rows[:n_validation])
        train_rows.append(rows[n_validation:])
    train_idx = np.sort(np.concatenate(train_rows))
    validation_idx = np.sort(np.concatenate(validation_rows))
    if len(train_idx) == 0 or len(validation_idx) == 0:
        raise EmptyInputError(f"cannot split {len(data)} vectors into train and validation")
    return data.subset(train_idx), data.subset(validation_idx)


# ---------------------------------------------------------------------------------------------------------------------
# metrics

@attr.frozen
class EvalMetrics:
    """ ABNORMAL is the positive class. Zero denominators give 0. """
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp > 0 else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn > 0 else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    def to_dict(self) -> Dict[str, Union[int, float]]:
        return {
            'tp': self.tp, 'fp': self.fp, 'fn': self.fn, 'tn': self.tn,
            'precision': self.precision, 'recall': self.recall, 'f1': self.f1,
        }


def _as_int_labels(labels) -> np.ndarray:
    if len(labels) > 0 and isinstance(labels[0], ClassLabel):
        return np.array([label.label.as_int for label in labels], dtype=np.int8)
    return np.asarray(labels, dtype=np.int8)


def evaluate(predictions: Sequence, truth: Sequence) -> EvalMetrics:
    """ Accepts ClassLabels or 0/1 arrays. """
    predicted, actual = _as_int_labels(predictions), _as_int_labels(truth)
    if len(predicted) != len(actual):
        raise DimensionMismatchError(len(actual), len(predicted), what='prediction count')
    if len(predicted) == 0:
        raise EmptyInputError("nothing to evaluate")
    return EvalMetrics(
        tp=int(np.sum((predicted == 1) & (actual == 1))),
        fp=int(np.sum((predicted == 1) & (actual == 0))),
        fn=int(np.sum((predicted == 0) & (actual == 1))),
        tn=int(np.sum((predicted == 0) & (actual == 0))),
    )


# ---------------------------------------------------------------------------------------------------------------------
# search

@attr.frozen
class GridRow:
    params: Dict[str, Union[int, float]]
    metrics: EvalMetrics

    @property
    def f1(self) -> float:
        return self.metrics.f1


@attr.frozen
class SearchResult:
    algorithm: Algorithm
    best_params: Dict[str, Union[int, float]]
    best_f1: float
    table: Tuple[GridRow, ...]
    metadata: Dict[str, Any]

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([{**row.params, 'f1': row.f1} for row in self.table])

    def summary(self) -> Dict[str, Any]:
        return {
            'algorithm': str(self.algorithm),
            'best_params': self.best_params,
            'best_f1': self.best_f1,
            'grid_points': len(self.table),
            **self.metadata,
        }

    def write(self, out_dir: str, stem: Optional[str] = None) -> Tuple[str, str]:
        """ <stem>.csv with one row per grid point and <stem>.json with the summary. """
        mkdir_p(out_dir)
        stem = stem or f"search_{self.algorithm}"
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        json_path = os.path.join(out_dir, f"{stem}.json")
        self.to_dataframe().to_csv(csv_path, index=False)
        with open(json_path, 'w') as f:
            json.dump(self.summary(), f, indent=2, sort_keys=True)
        return csv_path, json_path


def with_seed(algorithm: Algorithm, point: Dict[str, Any], seed: int) -> Dict[str, Any]:
    """ Adds rng_seed for the algorithms that take one; an explicit rng_seed in the point wins. """
    fields = {f.name for f in attr.fields(PARAMS_TYPES[algorithm])}
    return {'rng_seed': seed, **point} if 'rng_seed' in fields else dict(point)


def evaluate_point(algorithm: Algorithm, point: Dict[str, Any], train_data: Dataset, validation: Dataset, seed: int) -> GridRow:
    try:
        params = params_from_dict(algorithm, with_seed(algorithm, point, seed))
        model = train(algorithm, train_data, params)
        predicted, _ = predict_batch(model, validation.vectors)
    except NidsError as e:
        raise TrainingError(f"{algorithm} training failed: {e}", grid_point_or_none=point) from e
    except (ValueError, ArithmeticError) as e:
        raise TrainingError(f"{algorithm} training failed: {e!r}", grid_point_or_none=point) from e
    return GridRow(params=point, metrics=evaluate(predicted, validation.labels))


def grid_search(
    algorithm: Algorithm,
    grid: GridSpec,
    train_data: Dataset,
    validation: Dataset,
    seed: int,
    workers: int = 1,
    verbose: bool = False,
) -> SearchResult:
    """ One model per grid point; best F1 on validation wins, earliest grid point on ties. """
    algorithm = Algorithm(algorithm)
    if train_data.spec_version != validation.spec_version:
        raise SpecVersionMismatchError(train_data.spec_version, validation.spec_version)
    validation.check_dimension(train_data.dimension, what='validation set')

    points = make_grid(grid)
    logger.info(f"grid search {algorithm}: {len(points)} points, {len(train_data)} train / {len(validation)} validation")

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(evaluate_point, algorithm, p, train_data, validation, seed) for p in points]
            rows = [f.result() for f in tqdm(futures, desc=f'grid {algorithm}', disable=not verbose)]
    else:
        rows = [
            evaluate_point(algorithm, p, train_data, validation, seed)
            for p in tqdm(points, desc=f'grid {algorithm}', disable=not verbose)
        ]

    best = max(range(len(rows)), key=lambda i: (rows[i].f1, -i))
    return SearchResult(
        algorithm=algorithm,
        best_params=rows[best].params,
        best_f1=rows[best].f1,
        table=tuple(rows),
        metadata={
            'seed': seed,
            'validation_protocol': f"seeded {int(100 * (1 - VALIDATION_FRACTION))}/{int(100 * VALIDATION_FRACTION)} "
                                   f"stratified split",
            'train_size': len(train_data),
            'validation_size': len(validation),
            'spec_version': train_data.spec_version,
        },
    )


@attr.frozen
class DefaultsVsTuned:
    algorithm: Algorithm
    default_f1: float
    tuned_f1: float
    tuned_params: Dict[str, Union[int, float]]


def compare_defaults_vs_tuned(
    algorithm: Algorithm,
    grid: GridSpec,
    train_data: Dataset,
    validation: Dataset,
    seed: int,
    workers: int = 1,
) -> DefaultsVsTuned:
    algorithm = Algorithm(algorithm)
    defaults = with_seed(algorithm, {}, seed)
    default_row = evaluate_point(algorithm, defaults, train_data, validation, seed)
    result = grid_search(algorithm, grid, train_data, validation, seed, workers=workers)
    return DefaultsVsTuned(
        algorithm=algorithm,
        default_f1=default_row.f1,
        tuned_f1=result.best_f1,
        tuned_params=result.best_params,
    )
