""" Soft-margin SVM trained with SMO.

The working pair is the maximal KKT violating pair (first-order selection), so training is
deterministic and stops exactly when every KKT violation is within the tolerance. Labels are
-1 for NORMAL and +1 for ABNORMAL.
"""
import collections
import logging

import numpy as np

from nids.classifiers.dataset import Dataset
from nids.classifiers.kernels import kernel_matrix
from nids.classifiers.models import ModelMetadata, SVMModel
from nids.classifiers.params import Algorithm, SVMParams, params_to_dict
from nids.errors import TrainingError

logger = logging.getLogger(__name__)

_TAU = 1e-12
_ROW_CACHE_BYTES = 256 * 1024 * 1024


class _KernelRows:
    """ Q[i, :] = y_i * y * K(x_i, X), computed on demand with an LRU cache. """

    def __init__(self, X: np.ndarray, y: np.ndarray, params: SVMParams, gamma: float):
        self.X, self.y, self.params, self.gamma = X, y, params, gamma
        self.capacity = max(2, _ROW_CACHE_BYTES // max(1, 8 * len(X)))
        self.cache: 'collections.OrderedDict[int, np.ndarray]' = collections.OrderedDict()
        self.diagonal = np.array([self._kernel(X[i:i + 1], X[i:i + 1])[0, 0] for i in range(len(X))])

    def _kernel(self, A, B):
        p = self.params
        return kernel_matrix(A, B, p.kernel_k, p.degree_d, self.gamma, p.coef0)

    def row(self, i: int) -> np.ndarray:
        cached = self.cache.get(i)
        if cached is not None:
            self.cache.move_to_end(i)
            return cached
        q = self.y[i] * self.y * self._kernel(self.X[i:i + 1], self.X)[0]
        self.cache[i] = q
        if len(self.cache) > self.capacity:
            self.cache.popitem(last=False)
        return q


def _select_pair(alpha, G, y, C):
    """ Maximal violating pair, or None when the gap is within tolerance (caller checks). """
    minus_yG = -y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not np.any(up) or not np.any(low):
        return None, None, 0.0
    i = int(np.flatnonzero(up)[np.argmax(minus_yG[up])])
    j = int(np.flatnonzero(low)[np.argmin(minus_yG[low])])
    return i, j, float(minus_yG[i] - minus_yG[j])


def _rho(alpha, G, y, C) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(np.mean(yG[free]))
    at_upper = alpha >= C
    upper_bounds = ((at_upper & (y < 0)) | (~at_upper & (y > 0)))
    ub = np.min(yG[upper_bounds]) if np.any(upper_bounds) else np.inf
    lb = np.max(yG[~upper_bounds]) if np.any(~upper_bounds) else -np.inf
    if not np.isfinite(ub) or not np.isfinite(lb):
        return float(ub if np.isfinite(ub) else lb if np.isfinite(lb) else 0.0)
    return float((ub + lb) / 2.0)


def train_svm(data: Dataset, params: SVMParams = SVMParams()) -> SVMModel:
    X = data.vectors
    y = np.where(data.labels == 1, 1.0, -1.0)
    n = len(y)
    if np.all(y == y[0]):
        raise TrainingError("SVM training needs both classes in the data")

    C = params.complexity_c
    gamma = params.gamma if params.gamma is not None else 1.0 / data.dimension
    Q = _KernelRows(X, y, params, gamma)

    alpha = np.zeros(n)
    G = -np.ones(n)     # gradient of 0.5 a'Qa - e'a
    max_iterations = params.max_passes * n
    iterations = 0
    converged = False
    while iterations < max_iterations:
        i, j, gap = _select_pair(alpha, G, y, C)
        if i is None or gap <= params.smo_tolerance:
            converged = True
            break
        iterations += 1

        Q_i, Q_j = Q.row(i), Q.row(j)
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(Q.diagonal[i] + Q.diagonal[j] + 2.0 * Q_i[j], _TAU)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            quad = max(Q.diagonal[i] + Q.diagonal[j] - 2.0 * Q_i[j], _TAU)
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            else:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, total
                if alpha[i] < 0:
                    alpha[i], alpha[j] = 0.0, total

        G += Q_i * (alpha[i] - old_i) + Q_j * (alpha[j] - old_j)

    if not converged:
        logger.warning(f"SMO hit the iteration cap ({max_iterations}) before reaching tolerance {params.smo_tolerance}")

    rho = _rho(alpha, G, y, C)
    support = np.flatnonzero(alpha > 0)
    metadata = ModelMetadata(
        algorithm=Algorithm.SVM,
        params=params_to_dict(params),
        spec_version=data.spec_version,
        dimension=data.dimension,
        n_train=n,
        class_counts=[int(c) for c in data.class_counts()],
        notes={'support_vectors': int(len(support)), 'iterations': iterations, 'converged': converged},
    )
    return SVMModel(
        metadata=metadata,
        support_vectors=X[support].copy(),
        dual_coef=(alpha[support] * y[support]).astype(np.float64),
        rho=rho,
        kernel_k=int(params.kernel_k),
        degree_d=int(params.degree_d),
        gamma=float(gamma),
        coef0=float(params.coef0),
        converged=converged,
        iterations=iterations,
    )
