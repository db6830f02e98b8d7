""" Hyperparameters of the five algorithms, with the usual defaults. """
import enum
import math
from typing import Any, Dict, Optional, Type, Union

import attr

from nids.errors import ConfigError
from utils.enum_utils import StrEnum
from utils.serialization import from_native_types, to_native_types


class Algorithm(StrEnum):
    DT = 'dt'
    RF = 'rf'
    NB = 'nb'
    SVM = 'svm'
    KNN = 'knn'
    NULL = 'null'    # labels everything NORMAL, the no-classifier baseline


class Kernel(enum.IntEnum):
    LINEAR = 0
    POLYNOMIAL = 1
    RBF = 2
    SIGMOID = 3


def _in_open_unit(_, attribute, value):
    if not 0.0 < value < 1.0:
        raise ValueError(f"{attribute.name} must be in (0, 1), got {value}")


def _at_least_one(_, attribute, value):
    if value is not None and value < 1:
        raise ValueError(f"{attribute.name} must be >= 1, got {value}")


def _positive(_, attribute, value):
    if value is not None and not value > 0:
        raise ValueError(f"{attribute.name} must be > 0, got {value}")


@attr.frozen
class DTParams:
    confidence_c: float = attr.ib(default=0.25, validator=_in_open_unit)
    min_instances_m: int = attr.ib(default=2, validator=_at_least_one)
    pruned: bool = True


@attr.frozen
class RFParams:
    tree_count_i: int = attr.ib(default=100, validator=_at_least_one)
    min_leaf_n: int = attr.ib(default=1, validator=_at_least_one)     # searched over the grid's N column
    min_variance_v: float = attr.ib(default=1e-3, validator=_positive)
    features_per_split: Optional[int] = attr.ib(default=None, validator=_at_least_one)   # None: ceil(sqrt(d))
    rng_seed: int = 0
    bootstrap: bool = True

    def resolved_features_per_split(self, dimension: int) -> int:
        if self.features_per_split is None:
            return max(1, math.ceil(math.sqrt(dimension)))
        return min(self.features_per_split, dimension)


@attr.frozen
class NBParams:
    supervised_discretization_d: bool = True


@attr.frozen
class SVMParams:
    kernel_k: int = attr.ib(default=int(Kernel.RBF), validator=attr.validators.in_(range(4)))
    degree_d: int = attr.ib(default=3, validator=_at_least_one)
    complexity_c: float = attr.ib(default=1.0, validator=_positive)
    smo_tolerance: float = attr.ib(default=1e-3, validator=_positive)
    rng_seed: int = 0
    gamma: Optional[float] = attr.ib(default=None, validator=_positive)   # None: 1 / d
    coef0: float = 0.0                                                   # sigmoid only
    max_passes: int = attr.ib(default=10_000, validator=_at_least_one)   # one pass = n pair updates


@attr.frozen
class KNNParams:
    neighbors_k: int = attr.ib(default=1, validator=_at_least_one)
    inverse_distance_weighting_i: bool = True


@attr.frozen
class NullParams:
    pass


Params = Union[DTParams, RFParams, NBParams, SVMParams, KNNParams, NullParams]

PARAMS_TYPES: Dict[Algorithm, Type] = {
    Algorithm.DT: DTParams,
    Algorithm.RF: RFParams,
    Algorithm.NB: NBParams,
    Algorithm.SVM: SVMParams,
    Algorithm.KNN: KNNParams,
    Algorithm.NULL: NullParams,
}

# grid column letters -> field names
GRID_ALIASES: Dict[Algorithm, Dict[str, str]] = {
    Algorithm.DT: {'C': 'confidence_c', 'M': 'min_instances_m'},
    Algorithm.RF: {'I': 'tree_count_i', 'N': 'min_leaf_n', 'V': 'min_variance_v'},
    Algorithm.NB: {'D': 'supervised_discretization_d'},
    Algorithm.SVM: {'K': 'kernel_k', 'D': 'degree_d', 'C': 'complexity_c'},
    Algorithm.KNN: {'K': 'neighbors_k', 'I': 'inverse_distance_weighting_i'},
    Algorithm.NULL: {},
}


def params_from_dict(algorithm: Algorithm, values: Dict[str, Any]) -> Params:
    """ Accepts field names or grid letters, e.g. {'C': 0.3, 'M': 4} for DT. """
    algorithm = Algorithm(algorithm)
    aliases = GRID_ALIASES[algorithm]
    resolved = {aliases.get(key, key): value for key, value in values.items()}
    params_type = PARAMS_TYPES[algorithm]
    known = {f.name for f in attr.fields(params_type)}
    if unknown := set(resolved) - known:
        raise ConfigError(f"unknown {algorithm} parameters {sorted(unknown)}")
    try:
        return from_native_types(resolved, params_type)
    except Exception as e:
        raise ConfigError(f"invalid {algorithm} parameters {values}: {e}") from e


def params_to_dict(params: Params) -> Dict[str, Any]:
    return to_native_types(params)


def algorithm_of(params: Params) -> Algorithm:
    for algorithm, params_type in PARAMS_TYPES.items():
        if isinstance(params, params_type):
            return algorithm
    raise TypeError(f"not a parameter set: {params!r}")
