""" Breiman forest of unpruned trees.

Tree i draws all of its randomness from default_rng(seed + i), so the forest does not
depend on the order in which trees are built.
"""
import logging
from typing import Optional

import numpy as np
from tqdm import tqdm

from nids.classifiers.dataset import Dataset
from nids.classifiers.models import DECISION_THRESHOLD, ModelMetadata, RandomForestModel
from nids.classifiers.params import Algorithm, RFParams, params_to_dict
from nids.classifiers.tree import TreeArrays, flatten, grow_tree

logger = logging.getLogger(__name__)


def _grow_one(data: Dataset, params: RFParams, tree_index: int):
    rng = np.random.default_rng(params.rng_seed + tree_index)
    n = len(data)
    if params.bootstrap:
        sample = rng.integers(0, n, size=n)
    else:
        sample = np.arange(n)

    per_split = params.resolved_features_per_split(data.dimension)

    def feature_sampler(dimension: int) -> np.ndarray:
        return rng.choice(dimension, size=per_split, replace=False)

    root = grow_tree(
        data.vectors,
        data.labels,
        min_leaf=params.min_leaf_n,
        feature_sampler=feature_sampler,
        min_variance=params.min_variance_v,
        indices=sample,
    )
    return flatten(root), sample


def _out_of_bag_accuracy(data: Dataset, trees, samples) -> Optional[float]:
    n = len(data)
    votes = np.zeros(n)
    voters = np.zeros(n)
    for tree, sample in zip(trees, samples):
        out_of_bag = np.ones(n, dtype=bool)
        out_of_bag[sample] = False
        if not np.any(out_of_bag):
            continue
        rows = np.nonzero(out_of_bag)[0]
        votes[rows] += tree.scores(data.vectors[rows]) > DECISION_THRESHOLD
        voters[rows] += 1

    covered = voters > 0
    if not np.any(covered):
        return None
    predicted = (votes[covered] / voters[covered]) > DECISION_THRESHOLD
    return float(np.mean(predicted == (data.labels[covered] == 1)))


def train_random_forest(data: Dataset, params: RFParams = RFParams(), verbose: bool = False) -> RandomForestModel:
    trees: list[TreeArrays] = []
    samples = []
    for tree_index in tqdm(range(params.tree_count_i), desc='random forest', disable=not verbose):
        tree, sample = _grow_one(data, params, tree_index)
        trees.append(tree)
        samples.append(sample)

    oob_accuracy = _out_of_bag_accuracy(data, trees, samples) if params.bootstrap else None
    logger.debug(f"random forest: {len(trees)} trees, out-of-bag accuracy {oob_accuracy}")

    metadata = ModelMetadata(
        algorithm=Algorithm.RF,
        params=params_to_dict(params),
        spec_version=data.spec_version,
        dimension=data.dimension,
        n_train=len(data),
        class_counts=[int(c) for c in data.class_counts()],
        notes={
            'oob_accuracy': oob_accuracy,
            'features_per_split': params.resolved_features_per_split(data.dimension),
            'n_parameter': 'the N grid column is applied as min_leaf_n (minimum instances per leaf)',
        },
    )
    return RandomForestModel(metadata=metadata, trees=trees, seed=params.rng_seed)
