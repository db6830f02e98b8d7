import logging
from typing import Optional, Sequence

import attr
import numpy as np

from nids.errors import DimensionMismatchError, EmptyInputError
from nids.types import ClassLabel, Label
from utils.custom_types import FeatureMatrix, LabelArray

logger = logging.getLogger(__name__)


@attr.frozen(eq=False)
class Dataset:
    """ Encoded vectors with binary labels (0 = NORMAL, 1 = ABNORMAL), bound to a normalization spec. """
    vectors: FeatureMatrix
    labels: LabelArray
    spec_version: str

    def __attrs_post_init__(self):
        if self.vectors.ndim != 2:
            raise DimensionMismatchError(2, self.vectors.ndim, what='dataset rank')
        if len(self.vectors) == 0:
            raise EmptyInputError("a dataset needs at least one vector")
        if len(self.vectors) != len(self.labels):
            raise DimensionMismatchError(len(self.vectors), len(self.labels), what='label count')

    @classmethod
    def build(cls, vectors, labels, spec_version: str) -> 'Dataset':
        vectors = np.ascontiguousarray(np.asarray(vectors, dtype=np.float64))
        if vectors.ndim == 1 and len(vectors) > 0:
            vectors = vectors[:, None]
        return cls(
            vectors=vectors,
            labels=np.asarray(labels, dtype=np.int8).reshape(-1),
            spec_version=spec_version,
        )

    @classmethod
    def from_class_labels(cls, vectors, labels: Sequence[ClassLabel], spec_version: str) -> 'Dataset':
        return cls.build(vectors, [label.label.as_int for label in labels], spec_version)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=2)

    def class_labels(self) -> list:
        return [ClassLabel(Label.from_int(int(y))) for y in self.labels]

    def subset(self, indices) -> 'Dataset':
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.vectors[indices], self.labels[indices], self.spec_version)

    def check_dimension(self, dimension: int, what: str = 'dataset'):
        if self.dimension != dimension:
            raise DimensionMismatchError(dimension, self.dimension, what=what)


def check_vector(vector, dimension: int) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.ndim != 1 or vector.shape[0] != dimension:
        raise DimensionMismatchError(dimension, vector.shape[-1] if vector.ndim else 0)
    return vector


def check_matrix(vectors, dimension: int, what: Optional[str] = None) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim == 1:
        vectors = vectors[None, :]
    if vectors.shape[1] != dimension:
        raise DimensionMismatchError(dimension, vectors.shape[1], what=what or 'vector')
    return vectors
