import numpy as np

from nids.classifiers.params import Kernel
from utils.custom_types import FeatureMatrix


def kernel_matrix(A: FeatureMatrix, B: FeatureMatrix, kernel: int, degree: int, gamma: float, coef0: float) -> np.ndarray:
    """ Polynomial is (a.b + 1)^degree, so degree 1 equals linear up to a constant the bias absorbs. """
    dots = A @ B.T
    match Kernel(kernel):
        case Kernel.LINEAR:
            return dots
        case Kernel.POLYNOMIAL:
            return (dots + 1.0) ** degree
        case Kernel.RBF:
            sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * dots
            return np.exp(-gamma * np.maximum(sq, 0.0))
        case Kernel.SIGMOID:
            return np.tanh(gamma * dots + coef0)
