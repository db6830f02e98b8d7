import logging
from typing import Optional

from nids.classifiers.dataset import Dataset
from nids.classifiers.decision_tree import train_decision_tree
from nids.classifiers.knn import train_knn
from nids.classifiers.models import ModelMetadata, NullModel, TrainedModel
from nids.classifiers.naive_bayes import train_naive_bayes
from nids.classifiers.params import (
    PARAMS_TYPES, Algorithm, DTParams, KNNParams, NBParams, NullParams, Params, RFParams, SVMParams,
    params_to_dict,
)
from nids.classifiers.random_forest import train_random_forest
from nids.classifiers.svm import train_svm
from utils.profiling import just_time

logger = logging.getLogger(__name__)


def train_null(data: Dataset, params: NullParams = NullParams()) -> NullModel:
    return NullModel(metadata=ModelMetadata(
        algorithm=Algorithm.NULL,
        params=params_to_dict(params),
        spec_version=data.spec_version,
        dimension=data.dimension,
        n_train=len(data),
        class_counts=[int(c) for c in data.class_counts()],
    ))


def train(algorithm: Algorithm, data: Dataset, params: Optional[Params] = None, verbose: bool = False) -> TrainedModel:
    """ Dispatches to the trainer and records the wall time on the model. """
    algorithm = Algorithm(algorithm)
    params = params if params is not None else PARAMS_TYPES[algorithm]()
    if not isinstance(params, PARAMS_TYPES[algorithm]):
        raise TypeError(f"{algorithm} expects {PARAMS_TYPES[algorithm].__name__}, got {type(params).__name__}")

    with just_time(f"training {algorithm} on {len(data)} vectors", verbose=verbose) as timer:
        match params:
            case DTParams():
                model = train_decision_tree(data, params)
            case RFParams():
                model = train_random_forest(data, params, verbose=verbose)
            case NBParams():
                model = train_naive_bayes(data, params)
            case SVMParams():
                model = train_svm(data, params)
            case KNNParams():
                model = train_knn(data, params)
            case NullParams():
                model = train_null(data, params)

    model.metadata.train_time_s = timer['elapsed']
    return model
