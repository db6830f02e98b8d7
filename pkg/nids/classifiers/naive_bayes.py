""" Naive Bayes, either Gaussian or over supervised (MDL) discretized features. """
import logging
from typing import List

import numpy as np
from scipy.special import entr

from nids.classifiers.dataset import Dataset
from nids.classifiers.models import ModelMetadata, NaiveBayesModel
from nids.classifiers.params import Algorithm, NBParams, params_to_dict

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-9

_LN2 = np.log(2.0)


def _entropy(counts: np.ndarray) -> np.ndarray:
    """ Class entropy in bits along the last axis. """
    totals = counts.sum(axis=-1, keepdims=True)
    p = counts / np.maximum(totals, 1e-300)
    return entr(p).sum(axis=-1) / _LN2


def mdl_cut_points(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """ Recursive entropy-minimizing binary cuts, each accepted only if it passes the MDL
    criterion. Returns sorted midpoint cuts; a value equal to a cut falls in the lower bin. """
    order = np.argsort(x, kind='stable')
    xs, ys = x[order], y[order].astype(np.int64)
    cuts: List[float] = []
    stack = [(0, len(xs))]
    while stack:
        lo, hi = stack.pop()
        cut = _best_mdl_cut(xs[lo:hi], ys[lo:hi])
        if cut is None:
            continue
        position, threshold = cut
        cuts.append(threshold)
        stack.append((lo, lo + position))
        stack.append((lo + position, hi))
    return np.array(sorted(cuts), dtype=np.float64)


def _best_mdl_cut(xs: np.ndarray, ys: np.ndarray):
    n = len(xs)
    if n < 2:
        return None
    boundaries = np.nonzero(xs[:-1] < xs[1:])[0]
    if len(boundaries) == 0:
        return None

    one_hot = np.stack([ys == 0, ys == 1], axis=1).astype(np.float64)
    cum = np.cumsum(one_hot, axis=0)
    total = cum[-1]
    left = cum[boundaries]
    right = total - left
    nl = left.sum(axis=1)
    nr = right.sum(axis=1)

    weighted = (nl * _entropy(left) + nr * _entropy(right)) / n
    best = int(np.argmin(weighted))

    parent_entropy = float(_entropy(total))
    gain = parent_entropy - float(weighted[best])
    k = int(np.count_nonzero(total))
    k1 = int(np.count_nonzero(left[best]))
    k2 = int(np.count_nonzero(right[best]))
    delta = np.log2(3.0 ** k - 2.0) - (
        k * parent_entropy - k1 * float(_entropy(left[best])) - k2 * float(_entropy(right[best]))
    )
    if gain <= (np.log2(n - 1) + delta) / n:
        return None

    b = boundaries[best]
    lo, hi = xs[b], xs[b + 1]
    threshold = lo + (hi - lo) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return int(b + 1), float(threshold)


def _log_priors(counts: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore'):
        return np.log(counts / counts.sum())


def train_naive_bayes(data: Dataset, params: NBParams = NBParams()) -> NaiveBayesModel:
    X, y = data.vectors, data.labels
    counts = data.class_counts().astype(np.float64)
    metadata = ModelMetadata(
        algorithm=Algorithm.NB,
        params=params_to_dict(params),
        spec_version=data.spec_version,
        dimension=data.dimension,
        n_train=len(data),
        class_counts=[int(c) for c in counts],
    )

    if not params.supervised_discretization_d:
        means = np.zeros((2, data.dimension))
        variances = np.ones((2, data.dimension))
        for c in range(2):
            rows = X[y == c]
            if len(rows) > 0:
                means[c] = rows.mean(axis=0)
                variances[c] = np.maximum(rows.var(axis=0), VARIANCE_FLOOR)
        return NaiveBayesModel(
            metadata=metadata, log_priors=_log_priors(counts), discretized=False, means=means, variances=variances
        )

    cuts, tables = [], []
    for feature in range(data.dimension):
        feature_cuts = mdl_cut_points(X[:, feature], y)
        bins = np.searchsorted(feature_cuts, X[:, feature], side='left')
        n_bins = len(feature_cuts) + 1
        table = np.zeros((2, n_bins))
        for c in range(2):
            in_bin = np.bincount(bins[y == c], minlength=n_bins).astype(np.float64)
            table[c] = np.log((in_bin + 1.0) / (counts[c] + n_bins))    # Laplace
        cuts.append(feature_cuts)
        tables.append(table)

    metadata.notes['bins_per_feature'] = [len(c) + 1 for c in cuts]
    return NaiveBayesModel(
        metadata=metadata, log_priors=_log_priors(counts), discretized=True, cuts=cuts, bin_log_likelihoods=tables
    )
