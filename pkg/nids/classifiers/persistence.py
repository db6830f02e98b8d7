""" Model files: one msgpack map

    {format: 'nids-model', format_version: 1, kind, spec_version, params, metadata, state}

Arrays are packed by msgpack-numpy. Without include_timing the bytes depend only on
the training inputs, so two runs with the same seed write identical files.
"""
import logging
from typing import Optional

from nids.classifiers.models import MODEL_TYPES, TrainedModel
from nids.classifiers.params import Algorithm
from nids.errors import ModelFormatError, SpecVersionMismatchError
from utils.file_utils import ensure_path
from utils.serialization import from_native_types, msgpack_dumps, msgpack_loads, to_native_types

logger = logging.getLogger(__name__)

MODEL_FORMAT = 'nids-model'
MODEL_FORMAT_VERSION = 1


def save_model(model: TrainedModel, include_timing: bool = False) -> bytes:
    metadata = to_native_types(model.metadata)
    if not include_timing:
        metadata.pop('train_time_s', None)

    state = to_native_types(model)
    state.pop('metadata')

    return msgpack_dumps({
        'format': MODEL_FORMAT,
        'format_version': MODEL_FORMAT_VERSION,
        'kind': str(model.metadata.algorithm),
        'spec_version': model.metadata.spec_version,
        'params': metadata.pop('params'),
        'metadata': metadata,
        'state': state,
    })


def load_model(data: bytes, expected_spec_version: Optional[str] = None) -> TrainedModel:
    try:
        document = msgpack_loads(data)
    except Exception as e:
        raise ModelFormatError(f"model file is corrupt or truncated: {e}") from e

    if not isinstance(document, dict) or document.get('format') != MODEL_FORMAT:
        raise ModelFormatError("not a model file")
    if document.get('format_version') != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {document.get('format_version')!r}")

    try:
        kind = Algorithm(document['kind'])
        metadata = dict(document['metadata'])
        metadata['params'] = document['params']
        state = dict(document['state'])
        state['metadata'] = metadata
        model = from_native_types(state, MODEL_TYPES[kind])
    except Exception as e:
        raise ModelFormatError(f"model file content is malformed: {e}") from e

    if expected_spec_version is not None and model.metadata.spec_version != expected_spec_version:
        raise SpecVersionMismatchError(model.metadata.spec_version, expected_spec_version)
    return model


def save_model_file(model: TrainedModel, path: str, include_timing: bool = False) -> str:
    path = ensure_path(path)
    with open(path, 'wb') as f:
        f.write(save_model(model, include_timing=include_timing))
    logger.info(f"saved {model.metadata.algorithm} model to {path}")
    return path


def load_model_file(path: str, expected_spec_version: Optional[str] = None) -> TrainedModel:
    with open(path, 'rb') as f:
        return load_model(f.read(), expected_spec_version=expected_spec_version)
