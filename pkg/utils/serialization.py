import json
from typing import Any, Dict, Type, TypeVar

import msgpack
import msgpack_numpy as m
import numpy as np
from cattrs import GenConverter


def msgpack_dumps(obj: Any) -> bytes:
    return msgpack.packb(obj, use_bin_type=True, default=m.encode)


def msgpack_loads(data: bytes):
    return msgpack.unpackb(data, raw=False, object_hook=m.decode, strict_map_key=False)


_CONVERTER = None


def _get_converter_singleton() -> GenConverter:
    global _CONVERTER

    if _CONVERTER is None:
        converter = GenConverter()

        def is_array(t) -> bool:
            return t is np.ndarray or getattr(t, "__origin__", None) is np.ndarray

        # arrays stay arrays, msgpack-numpy packs them
        converter.register_unstructure_hook_func(is_array, lambda v: v)
        converter.register_structure_hook_func(is_array, lambda v, t: np.asarray(v))

        _CONVERTER = converter

    return _CONVERTER


def to_native_types(obj: Any) -> Dict[str, Any]:
    return _get_converter_singleton().unstructure(obj)


T = TypeVar('T')


def from_native_types(data: Dict[str, Any], target_type: Type[T]) -> T:
    return _get_converter_singleton().structure(data, target_type)


def dumps_json_line(obj: Dict[str, Any]) -> str:
    return json.dumps(obj, separators=(',', ':'), sort_keys=False) + '\n'



__all__ = [
    'msgpack_dumps',
    'msgpack_loads',
    'to_native_types',
    'from_native_types',
    'dumps_json_line',
]
