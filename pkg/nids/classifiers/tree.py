""" Binary decision trees over numeric features, shared by the DT and RF trainers.

Splits are `x[feature] <= threshold` to the left. Thresholds are midpoints between
consecutive distinct values of the node's data, so each side gets at least one point.
"""
import logging
from typing import Callable, List, Optional, Tuple

import attr
import numpy as np
from scipy.special import entr
from scipy.stats import norm

from utils.custom_types import Array, FeatureMatrix, LabelArray, ScoreArray

logger = logging.getLogger(__name__)

LEAF = -1

_MIN_GAIN = 1e-12
_LN2 = np.log(2.0)

FeatureSampler = Callable[[int], np.ndarray]    # dimension -> candidate feature indices


@attr.frozen(eq=False)
class TreeArrays:
    """ Flat node arrays; node 0 is the root. counts[i] = (normal, abnormal) training instances at node i. """
    feature: Array['M', np.int64]
    threshold: Array['M', np.float64]
    left: Array['M', np.int64]
    right: Array['M', np.int64]
    counts: Array['M,2', np.float64]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def leaf_count(self) -> int:
        return int(np.sum(self.feature == LEAF))

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):     # children always come after their parent
            if not self.is_leaf(node):
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, X: FeatureMatrix) -> Array['N', np.int64]:
        """ Leaf index reached by each row. """
        nodes = np.zeros(len(X), dtype=np.int64)
        active = self.feature[nodes] != LEAF
        while np.any(active):
            rows = np.nonzero(active)[0]
            at = nodes[rows]
            go_left = X[rows, self.feature[at]] <= self.threshold[at]
            nodes[rows] = np.where(go_left, self.left[at], self.right[at])
            active[rows] = self.feature[nodes[rows]] != LEAF
        return nodes

    def scores(self, X: FeatureMatrix) -> ScoreArray:
        """ Fraction of ABNORMAL training instances in the reached leaf. """
        counts = self.counts[self.apply(X)]
        return counts[:, 1] / np.maximum(counts.sum(axis=1), 1e-300)


@attr.define
class _Node:
    indices: np.ndarray
    counts: np.ndarray
    feature: int = LEAF
    threshold: float = np.nan
    left: Optional['_Node'] = None
    right: Optional['_Node'] = None
    estimated_errors: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF

    def make_leaf(self):
        self.feature, self.threshold, self.left, self.right = LEAF, np.nan, None, None


@attr.frozen
class _Split:
    feature: int
    threshold: float
    gain: float
    gain_ratio: float


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    return (entr(p) + entr(1.0 - p)) / _LN2


def _best_threshold(x: np.ndarray, y: np.ndarray, min_leaf: int) -> Optional[Tuple[float, float, float]]:
    """ (threshold, information gain, split info) of the best cut on one feature, or None. """
    n = len(x)
    order = np.argsort(x, kind='stable')
    xs, ys = x[order], y[order]
    boundaries = np.nonzero(xs[:-1] < xs[1:])[0]
    n_left = boundaries + 1
    boundaries = boundaries[(n_left >= min_leaf) & (n - n_left >= min_leaf)]
    if len(boundaries) == 0:
        return None

    cum_abnormal = np.cumsum(ys, dtype=np.float64)
    total_abnormal = cum_abnormal[-1]
    nl = (boundaries + 1).astype(np.float64)
    nr = n - nl
    left_abnormal = cum_abnormal[boundaries]
    right_abnormal = total_abnormal - left_abnormal

    children = (nl * _binary_entropy(left_abnormal / nl) + nr * _binary_entropy(right_abnormal / nr)) / n
    gains = _binary_entropy(np.array([total_abnormal / n]))[0] - children
    best = int(np.argmax(gains))

    lo, hi = xs[boundaries[best]], xs[boundaries[best] + 1]
    threshold = lo + (hi - lo) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    split_info = float(_binary_entropy(np.array([nl[best] / n]))[0])
    return float(threshold), float(gains[best]), split_info


def find_split(
    X: FeatureMatrix,
    y: LabelArray,
    indices: np.ndarray,
    features: np.ndarray,
    min_leaf: int,
    min_variance: float = 0.0,
) -> Optional[_Split]:
    """ Gain-ratio choice among the cuts whose gain is at least the average gain. """
    candidates = []
    for feature in features:
        x = X[indices, feature]
        if min_variance > 0 and np.var(x) < min_variance:
            continue
        best = _best_threshold(x, y[indices], min_leaf)
        if best is None:
            continue
        threshold, gain, split_info = best
        if gain > _MIN_GAIN:
            candidates.append(_Split(int(feature), threshold, gain, gain / split_info if split_info > 0 else 0.0))

    if not candidates:
        return None

    average_gain = np.mean([c.gain for c in candidates])
    eligible = [c for c in candidates if c.gain >= average_gain - 1e-12]
    return max(eligible, key=lambda c: (c.gain_ratio, -c.feature))


def grow_tree(
    X: FeatureMatrix,
    y: LabelArray,
    min_leaf: int,
    feature_sampler: Optional[FeatureSampler] = None,
    min_variance: float = 0.0,
    indices: Optional[np.ndarray] = None,
) -> _Node:
    """ Greedy top-down growth. A node stays a leaf when it is pure, has fewer than 2 * min_leaf
    instances, or no cut with positive gain leaves min_leaf instances on each side. """
    dimension = X.shape[1]
    indices = np.arange(len(X)) if indices is None else indices
    root = _Node(indices=indices, counts=_class_counts(y[indices]))
    stack = [root]
    while stack:
        node = stack.pop()
        n = len(node.indices)
        if n < 2 * min_leaf or node.counts.min() == 0:
            continue

        features = np.arange(dimension) if feature_sampler is None else np.sort(feature_sampler(dimension))
        split = find_split(X, y, node.indices, features, min_leaf, min_variance)
        if split is None:
            continue

        go_left = X[node.indices, split.feature] <= split.threshold
        left_indices, right_indices = node.indices[go_left], node.indices[~go_left]
        node.feature, node.threshold = split.feature, split.threshold
        node.left = _Node(indices=left_indices, counts=_class_counts(y[left_indices]))
        node.right = _Node(indices=right_indices, counts=_class_counts(y[right_indices]))
        stack.extend([node.right, node.left])
    return root


def _class_counts(y: np.ndarray) -> np.ndarray:
    return np.bincount(y, minlength=2).astype(np.float64)


class PessimisticPruner:
    """ C4.5 subtree replacement: a subtree collapses into a leaf when the leaf's upper
    confidence bound on errors is no worse than the subtree's. """

    def __init__(self, confidence: float):
        self.confidence = confidence
        self.z_squared = float(norm.ppf(1.0 - confidence)) ** 2

    def added_errors(self, total: float, errors: float) -> float:
        if total <= 0:
            return 0.0
        if errors < 1e-6:
            return total * (1.0 - np.exp(np.log(self.confidence) / total))
        if errors < 0.9999:
            base = total * (1.0 - np.exp(np.log(self.confidence) / total))
            return base + errors * (self.added_errors(total, 1.0) - base)
        if errors + 0.5 >= total:
            return 0.67 * (total - errors)

        z2 = self.z_squared
        upper = (errors + 0.5 + z2 / 2 + np.sqrt(z2 * ((errors + 0.5) * (1 - (errors + 0.5) / total) + z2 / 4))) \
            / (total + z2)
        return total * upper - errors

    def leaf_estimate(self, counts: np.ndarray) -> float:
        total = float(counts.sum())
        errors = total - float(counts.max())
        return errors + self.added_errors(total, errors)

    def prune(self, root: _Node) -> int:
        """ Returns how many subtrees were collapsed. """
        collapsed = 0
        for node in reversed(_preorder(root)):
            as_leaf = self.leaf_estimate(node.counts)
            if node.is_leaf:
                node.estimated_errors = as_leaf
                continue
            as_subtree = node.left.estimated_errors + node.right.estimated_errors
            if as_leaf <= as_subtree + 0.1:
                node.make_leaf()
                node.estimated_errors = as_leaf
                collapsed += 1
            else:
                node.estimated_errors = as_subtree
        return collapsed


def _preorder(root: _Node) -> List[_Node]:
    order, stack = [], [root]
    while stack:
        node = stack.pop()
        order.append(node)
        if not node.is_leaf:
            stack.extend([node.right, node.left])
    return order


def flatten(root: _Node) -> TreeArrays:
    nodes = _preorder(root)
    position = {id(node): i for i, node in enumerate(nodes)}
    m = len(nodes)
    feature = np.full(m, LEAF, dtype=np.int64)
    threshold = np.zeros(m, dtype=np.float64)
    left = np.full(m, LEAF, dtype=np.int64)
    right = np.full(m, LEAF, dtype=np.int64)
    counts = np.zeros((m, 2), dtype=np.float64)
    for i, node in enumerate(nodes):
        counts[i] = node.counts
        if not node.is_leaf:
            feature[i] = node.feature
            threshold[i] = node.threshold
            left[i] = position[id(node.left)]
            right[i] = position[id(node.right)]
    return TreeArrays(feature=feature, threshold=threshold, left=left, right=right, counts=counts)
