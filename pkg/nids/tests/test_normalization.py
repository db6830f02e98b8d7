import json

import numpy as np
import pytest

from nids.errors import EmptyInputError, ModelFormatError
from nids.host_features import WINDOW_CAPACITY, FullFeatureRecord, HostFeatures, HostWindowState
from nids.normalization import (
    CATEGORICAL_FEATURES, NUMERIC_FEATURES, OTHER_BUCKET, NormalizationSpec, encode_all, fit_normalization,
    strip_and_encode,
)
from nids.tests.factories import make_session, random_sessions
from nids.types import Protocol


def _get_test_setup():
    training = list(HostWindowState().extract_all(random_sessions(200, seed=3)))
    return training, fit_normalization(training)


def _component(spec: NormalizationSpec, vector: np.ndarray, name: str) -> float:
    return float(vector[spec.layout().index(name)])


def test_encoded_vectors_lie_in_the_unit_cube():
    training, spec = _get_test_setup()
    vectors = encode_all(training, spec)

    assert vectors.shape == (len(training), spec.dimension)
    assert vectors.min() >= 0.0 and vectors.max() <= 1.0

    # exactly one hot component per categorical block
    hot = vectors[:, len(NUMERIC_FEATURES):].sum(axis=1)
    np.testing.assert_array_equal(hot, len(CATEGORICAL_FEATURES))


def test_values_above_the_training_maximum_clamp_to_one():
    training, spec = _get_test_setup()
    biggest = max(record.session.src_bytes for record in training)
    record = FullFeatureRecord(make_session(src_bytes=10 * biggest), HostFeatures())

    vector = strip_and_encode(record, spec)
    assert _component(spec, vector, 'src_bytes') == 1.0


def test_defined_maxima_come_from_the_feature_definition():
    _, spec = _get_test_setup()
    assert spec.maxima['dst_port'] == 65535.0
    assert spec.maxima['dst_host_count'] == float(WINDOW_CAPACITY)

    record = FullFeatureRecord(make_session(dst_port=65535), HostFeatures(dst_host_count=50))
    vector = strip_and_encode(record, spec)
    assert _component(spec, vector, 'dst_port') == 1.0
    assert _component(spec, vector, 'dst_host_count') == pytest.approx(0.5)


def test_unseen_categories_go_to_the_other_bucket():
    _, spec = _get_test_setup()
    assert 'gopher' not in spec.vocabularies['service']

    vector = strip_and_encode(FullFeatureRecord(make_session(service='gopher'), HostFeatures()), spec)
    assert _component(spec, vector, f'service={OTHER_BUCKET}') == 1.0
    assert all(spec.vocabularies[name][-1] == OTHER_BUCKET for name in CATEGORICAL_FEATURES)


def test_removed_features_do_not_reach_the_vector():
    _, spec = _get_test_setup()
    session = make_session()
    moved = make_session(timestamp_ms=99_999_999, src='10.9.9.9', dst='172.16.0.1')

    np.testing.assert_array_equal(
        strip_and_encode(FullFeatureRecord(session, HostFeatures()), spec),
        strip_and_encode(FullFeatureRecord(moved, HostFeatures()), spec),
    )


def test_spec_version_follows_content():
    training, spec = _get_test_setup()
    assert spec.spec_version == fit_normalization(training).spec_version
    assert spec.spec_version.startswith('v1-')

    udp_only = [FullFeatureRecord(make_session(protocol=Protocol.UDP, service='dns'), HostFeatures())]
    assert fit_normalization(udp_only).spec_version != spec.spec_version


def test_save_and_load(tmp_path):
    _, spec = _get_test_setup()
    path = spec.save(str(tmp_path / 'model.spec.json'))

    loaded = NormalizationSpec.load(path)
    assert loaded == spec
    assert loaded.spec_version == spec.spec_version


def test_tampered_layout_is_rejected(tmp_path):
    _, spec = _get_test_setup()
    data = spec.to_json_dict()
    data['layout'] = list(reversed(data['layout']))
    path = tmp_path / 'bad.spec.json'
    path.write_text(json.dumps(data))

    with pytest.raises(ModelFormatError):
        NormalizationSpec.load(str(path))


def test_non_positive_maxima_are_rejected():
    _, spec = _get_test_setup()
    with pytest.raises(ValueError):
        NormalizationSpec(maxima={**spec.maxima, 'src_bytes': 0.0}, vocabularies=spec.vocabularies)


def test_fitting_on_nothing_raises():
    with pytest.raises(EmptyInputError):
        fit_normalization([])
