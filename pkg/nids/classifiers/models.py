""" Trained models. Every variant scores a row as its confidence for ABNORMAL in [0, 1];
the label is ABNORMAL iff the score is strictly above 0.5, so all ties go to NORMAL. """
import logging
from typing import Any, Dict, List, Optional, Tuple, Union

import attr
import numpy as np
from scipy.special import expit

from nids.classifiers.dataset import check_matrix, check_vector
from nids.classifiers.kernels import kernel_matrix
from nids.classifiers.params import Algorithm
from nids.classifiers.tree import TreeArrays
from nids.types import ClassLabel, Label
from utils.custom_types import Array, FeatureMatrix, FeatureVector, LabelArray, ScoreArray

logger = logging.getLogger(__name__)

DECISION_THRESHOLD = 0.5
KNN_DISTANCE_EPSILON = 1e-12

_KNN_CHUNK_ELEMENTS = 4_000_000


@attr.define
class ModelMetadata:
    algorithm: Algorithm
    params: Dict[str, Any]
    spec_version: str
    dimension: int
    n_train: int
    class_counts: List[int]
    notes: Dict[str, Any] = attr.Factory(dict)
    train_time_s: Optional[float] = None    # kept in memory, persisted only on request


@attr.define(eq=False)
class DecisionTreeModel:
    metadata: ModelMetadata
    tree: TreeArrays

    def scores(self, X: FeatureMatrix) -> ScoreArray:
        return self.tree.scores(X)


@attr.define(eq=False)
class RandomForestModel:
    metadata: ModelMetadata
    trees: List[TreeArrays]
    seed: int

    def scores(self, X: FeatureMatrix) -> ScoreArray:
        """ Fraction of trees voting ABNORMAL. """
        votes = np.zeros(len(X), dtype=np.float64)
        for tree in self.trees:
            votes += tree.scores(X) > DECISION_THRESHOLD
        return votes / len(self.trees)


@attr.define(eq=False)
class NaiveBayesModel:
    metadata: ModelMetadata
    log_priors: Array['2', np.float64]
    discretized: bool
    # gaussian mode
    means: Optional[Array['2,D', np.float64]] = None
    variances: Optional[Array['2,D', np.float64]] = None
    # discretized mode: per feature, sorted cut points and (2, bins) log likelihoods
    cuts: List[Array['B', np.float64]] = attr.Factory(list)
    bin_log_likelihoods: List[Array['2,B', np.float64]] = attr.Factory(list)

    def log_posteriors(self, X: FeatureMatrix) -> Array['N,2', np.float64]:
        """ Unnormalized: log prior + sum of log likelihoods, per class. """
        joint = np.tile(self.log_priors, (len(X), 1))
        if self.discretized:
            for feature, (cuts, table) in enumerate(zip(self.cuts, self.bin_log_likelihoods)):
                bins = np.searchsorted(cuts, X[:, feature], side='left')
                joint += table[:, bins].T
        else:
            for c in range(2):
                var = self.variances[c]
                joint[:, c] += np.sum(-0.5 * np.log(2.0 * np.pi * var) - (X - self.means[c]) ** 2 / (2.0 * var), axis=1)
        return joint

    def scores(self, X: FeatureMatrix) -> ScoreArray:
        joint = self.log_posteriors(X)
        with np.errstate(invalid='ignore'):
            return expit(joint[:, 1] - joint[:, 0])


@attr.define(eq=False)
class SVMModel:
    metadata: ModelMetadata
    support_vectors: Array['S,D', np.float64]
    dual_coef: Array['S', np.float64]      # alpha_i * y_i
    rho: float
    kernel_k: int
    degree_d: int
    gamma: float
    coef0: float
    converged: bool
    iterations: int

    def decision_values(self, X: FeatureMatrix) -> Array['N', np.float64]:
        K = kernel_matrix(X, self.support_vectors, self.kernel_k, self.degree_d, self.gamma, self.coef0)
        return K @ self.dual_coef - self.rho

    def scores(self, X: FeatureMatrix) -> ScoreArray:
        return expit(self.decision_values(X))


@attr.define(eq=False)
class KNNModel:
    metadata: ModelMetadata
    vectors: FeatureMatrix
    labels: LabelArray
    neighbors_k: int
    weighted: bool

    def neighbors(self, X: FeatureMatrix) -> Tuple[Array['N,K', np.int64], Array['N,K', np.float64]]:
        """ Indices and Euclidean distances of the k nearest training points; equal distances keep training order. """
        k = self.neighbors_k
        chunk = max(1, _KNN_CHUNK_ELEMENTS // max(1, self.vectors.size))
        all_indices, all_distances = [], []
        for start in range(0, len(X), chunk):
            Q = X[start:start + chunk]
            distances = np.sqrt(np.sum((Q[:, None, :] - self.vectors[None, :, :]) ** 2, axis=2))
            nearest = np.argsort(distances, axis=1, kind='stable')[:, :k]
            all_indices.append(nearest)
            all_distances.append(np.take_along_axis(distances, nearest, axis=1))
        if not all_indices:
            return np.zeros((0, k), dtype=np.int64), np.zeros((0, k))
        return np.concatenate(all_indices), np.concatenate(all_distances)

    def scores(self, X: FeatureMatrix) -> ScoreArray:
        nearest, distances = self.neighbors(X)
        if self.weighted:
            weights = 1.0 / (distances + KNN_DISTANCE_EPSILON)
        else:
            weights = np.ones_like(distances)
        abnormal = self.labels[nearest] == 1
        return np.sum(weights * abnormal, axis=1) / np.sum(weights, axis=1)


@attr.define(eq=False)
class NullModel:
    metadata: ModelMetadata

    def scores(self, X: FeatureMatrix) -> ScoreArray:
        return np.zeros(len(X), dtype=np.float64)


TrainedModel = Union[DecisionTreeModel, RandomForestModel, NaiveBayesModel, SVMModel, KNNModel, NullModel]

MODEL_TYPES = {
    Algorithm.DT: DecisionTreeModel,
    Algorithm.RF: RandomForestModel,
    Algorithm.NB: NaiveBayesModel,
    Algorithm.SVM: SVMModel,
    Algorithm.KNN: KNNModel,
    Algorithm.NULL: NullModel,
}


def labels_from_scores(scores: ScoreArray) -> LabelArray:
    return (scores > DECISION_THRESHOLD).astype(np.int8)


def predict(model: TrainedModel, vector: FeatureVector) -> Tuple[ClassLabel, float]:
    vector = check_vector(vector, model.metadata.dimension)
    score = float(model.scores(vector[None, :])[0])
    return ClassLabel(Label.ABNORMAL if score > DECISION_THRESHOLD else Label.NORMAL), score


def predict_batch(model: TrainedModel, vectors: FeatureMatrix) -> Tuple[LabelArray, ScoreArray]:
    vectors = check_matrix(vectors, model.metadata.dimension)
    scores = model.scores(vectors)
    return labels_from_scores(scores), scores
