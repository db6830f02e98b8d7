""" Feature removal, [0, 1] normalization and one-hot encoding of full feature records.

Layout of an encoded vector, fixed for a given spec:
    14 numeric components (NUMERIC_FEATURES order), then one one-hot block per
    categorical feature (CATEGORICAL_FEATURES order), each block ordered as its vocabulary.
Timestamp and both addresses never reach the vector.
"""
import hashlib
import json
import logging
from typing import Dict, List, Sequence, Tuple

import attr
import numpy as np

from nids.errors import EmptyInputError, ModelFormatError
from nids.host_features import WINDOW_CAPACITY, FullFeatureRecord, HostFeatures
from nids.types import MAX_PORT
from utils.custom_types import FeatureMatrix, FeatureVector
from utils.file_utils import ensure_path

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

OTHER_BUCKET = '<other>'

# maxima that come from the feature definition, not from data
SPEC_DEFINED_MAXIMA: Dict[str, float] = {
    'src_port': float(MAX_PORT),
    'dst_port': float(MAX_PORT),
    **{name: float(WINDOW_CAPACITY) for name in HostFeatures.names()},
}

# maxima observed on the training data
DATA_DEFINED_FEATURES: Tuple[str, ...] = (
    'duration_s',
    'src_packets', 'src_bytes', 'src_ip_bytes',
    'dst_packets', 'dst_bytes', 'dst_ip_bytes',
)

NUMERIC_FEATURES: Tuple[str, ...] = (
    'duration_s', 'src_port', 'dst_port',
    'src_packets', 'src_bytes', 'src_ip_bytes',
    'dst_packets', 'dst_bytes', 'dst_ip_bytes',
    *HostFeatures.names(),
)

CATEGORICAL_FEATURES: Tuple[str, ...] = ('protocol', 'service', 'conn_state', 'direction')

REMOVED_FEATURES: Tuple[str, ...] = ('timestamp_ms', 'src_addr', 'dst_addr')


def numeric_value(record: FullFeatureRecord, name: str) -> float:
    session = record.session
    match name:
        case 'src_port':
            return float(session.five_tuple.src_port)
        case 'dst_port':
            return float(session.five_tuple.dst_port)
        case _ if hasattr(record.host, name):
            return float(getattr(record.host, name))
        case _:
            return float(getattr(session, name))


def categorical_value(record: FullFeatureRecord, name: str) -> str:
    return str(getattr(record.session, name))


@attr.frozen
class NormalizationSpec:
    maxima: Dict[str, float]
    vocabularies: Dict[str, Tuple[str, ...]]
    schema_version: int = SCHEMA_VERSION

    def __attrs_post_init__(self):
        if missing := set(NUMERIC_FEATURES) - set(self.maxima):
            raise ValueError(f"missing maxima for {sorted(missing)}")
        if bad := {k: v for k, v in self.maxima.items() if not v > 0 or not np.isfinite(v)}:
            raise ValueError(f"maxima must be finite and > 0, got {bad}")
        for name in CATEGORICAL_FEATURES:
            if not self.vocabularies.get(name):
                raise ValueError(f"vocabulary for {name} is empty")

    @property
    def dimension(self) -> int:
        return len(NUMERIC_FEATURES) + sum(len(self.vocabularies[name]) for name in CATEGORICAL_FEATURES)

    def layout(self) -> List[str]:
        """ Component names, e.g. ['duration_s', ..., 'protocol=tcp', ..., 'direction=<other>'] """
        names = list(NUMERIC_FEATURES)
        for feature in CATEGORICAL_FEATURES:
            names.extend(f"{feature}={value}" for value in self.vocabularies[feature])
        return names

    @property
    def spec_version(self) -> str:
        """ Binds models and datasets to this exact encoding. """
        digest = hashlib.sha256(self.to_json().encode()).hexdigest()[:12]
        return f"v{self.schema_version}-{digest}"

    def to_json_dict(self) -> Dict:
        return {
            'schema_version': self.schema_version,
            'maxima': {name: self.maxima[name] for name in NUMERIC_FEATURES},
            'vocabularies': {name: list(self.vocabularies[name]) for name in CATEGORICAL_FEATURES},
            'layout': self.layout(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json_dict(cls, data: Dict) -> 'NormalizationSpec':
        try:
            schema_version = int(data['schema_version'])
            if schema_version != SCHEMA_VERSION:
                raise ModelFormatError(f"unsupported normalization schema version {schema_version}")
            spec = cls(
                maxima={k: float(v) for k, v in data['maxima'].items()},
                vocabularies={k: tuple(v) for k, v in data['vocabularies'].items()},
                schema_version=schema_version,
            )
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            if isinstance(e, ModelFormatError):
                raise
            raise ModelFormatError(f"malformed normalization spec: {e}") from e

        if 'layout' in data and list(data['layout']) != spec.layout():
            raise ModelFormatError("normalization spec layout does not match its maxima and vocabularies")
        return spec

    def save(self, path: str) -> str:
        path = ensure_path(path)
        with open(path, 'w') as f:
            f.write(self.to_json())
        return path

    @classmethod
    def load(cls, path: str) -> 'NormalizationSpec':
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"normalization spec {path} is not valid JSON: {e}") from e
        return cls.from_json_dict(data)


def fit_normalization(training: Sequence[FullFeatureRecord]) -> NormalizationSpec:
    if len(training) == 0:
        raise EmptyInputError("cannot fit a normalization spec on an empty training set")

    maxima = dict(SPEC_DEFINED_MAXIMA)
    for name in DATA_DEFINED_FEATURES:
        observed = max(numeric_value(record, name) for record in training)
        maxima[name] = observed if observed > 0 else 1.0

    vocabularies = {}
    for name in CATEGORICAL_FEATURES:
        seen = sorted({categorical_value(record, name) for record in training})
        vocabularies[name] = tuple(seen) + (OTHER_BUCKET,)

    spec = NormalizationSpec(maxima=maxima, vocabularies=vocabularies)
    logger.info(f"fitted normalization spec {spec.spec_version} on {len(training)} records, dimension {spec.dimension}")
    return spec


def strip_and_encode(record: FullFeatureRecord, spec: NormalizationSpec) -> FeatureVector:
    vector = np.zeros(spec.dimension, dtype=np.float64)
    for i, name in enumerate(NUMERIC_FEATURES):
        value = numeric_value(record, name) / spec.maxima[name]
        vector[i] = min(value, 1.0) if value > 0 else 0.0   # NaN lands on 0

    offset = len(NUMERIC_FEATURES)
    for name in CATEGORICAL_FEATURES:
        vocabulary = spec.vocabularies[name]
        value = categorical_value(record, name)
        index = vocabulary.index(value) if value in vocabulary else vocabulary.index(OTHER_BUCKET)
        vector[offset + index] = 1.0
        offset += len(vocabulary)

    return vector


def encode_all(records: Sequence[FullFeatureRecord], spec: NormalizationSpec) -> FeatureMatrix:
    if len(records) == 0:
        return np.zeros((0, spec.dimension), dtype=np.float64)
    return np.stack([strip_and_encode(record, spec) for record in records])
