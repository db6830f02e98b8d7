import json
import os

import attr
import numpy as np
import pytest

from utils.date_utils import parse_epoch_seconds
from utils.enum_utils import StrEnum, parse_enum
from utils.file_utils import fresh_file_path, make_run_dir
from utils.serialization import dumps_json_line, from_native_types, msgpack_dumps, msgpack_loads, to_native_types


class _Colour(StrEnum):
    RED = 'red'
    DARK_BLUE = 'dark-blue'


@attr.define(eq=False)
class _Centroids:
    name: str
    points: np.ndarray


def test_msgpack_keeps_arrays():
    data = {'weights': np.arange(6, dtype=np.float64).reshape(2, 3), 'labels': np.array([0, 1], dtype=np.int8)}
    loaded = msgpack_loads(msgpack_dumps(data))

    np.testing.assert_array_equal(loaded['weights'], data['weights'])
    assert loaded['labels'].dtype == np.int8


def test_attrs_with_arrays_through_native_types():
    centroids = _Centroids('normal', np.eye(3))
    native = to_native_types(centroids)
    assert native['name'] == 'normal'

    back = from_native_types(msgpack_loads(msgpack_dumps(native)), _Centroids)
    np.testing.assert_array_equal(back.points, centroids.points)


def test_json_lines_are_compact():
    line = dumps_json_line({'b': 1, 'a': [1, 2]})
    assert line == '{"b":1,"a":[1,2]}\n'
    assert json.loads(line) == {'b': 1, 'a': [1, 2]}


def test_parse_enum():
    assert parse_enum(_Colour, ' RED ') is _Colour.RED
    assert parse_enum(_Colour, 'dark_blue') is _Colour.DARK_BLUE
    assert parse_enum(_Colour, 'green', default_or_none=_Colour.RED) is _Colour.RED
    with pytest.raises(ValueError):
        parse_enum(_Colour, 'green')


def test_parse_epoch_seconds():
    assert parse_epoch_seconds(' 1424242424.5 ') == 1424242424.5
    assert parse_epoch_seconds('1970-01-01T00:01:40') == 100.0
    assert parse_epoch_seconds('1970-01-01T02:01:40+02:00') == 100.0
    with pytest.raises(ValueError):
        parse_epoch_seconds('yesterday')


def test_fresh_file_path_never_reuses(tmp_path):
    target = str(tmp_path / 'out' / 'sink.jsonl')
    assert fresh_file_path(target) == target
    assert os.path.isdir(tmp_path / 'out')

    open(target, 'w').close()
    assert fresh_file_path(target) == str(tmp_path / 'out' / 'sink.1.jsonl')
    open(fresh_file_path(target), 'w').close()
    assert fresh_file_path(target) == str(tmp_path / 'out' / 'sink.2.jsonl')


def test_run_dirs_are_unique(tmp_path):
    first, second = make_run_dir('train', where=str(tmp_path)), make_run_dir('train', where=str(tmp_path))
    assert first != second
    assert os.path.isdir(first) and os.path.basename(first).startswith('train_')
