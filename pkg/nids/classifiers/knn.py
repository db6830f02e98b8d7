from nids.classifiers.dataset import Dataset
from nids.classifiers.models import KNNModel, ModelMetadata
from nids.classifiers.params import Algorithm, KNNParams, params_to_dict
from nids.errors import TrainingError


def train_knn(data: Dataset, params: KNNParams = KNNParams()) -> KNNModel:
    """ Brute-force index: the dataset is kept verbatim. """
    if params.neighbors_k > len(data):
        raise TrainingError(f"k={params.neighbors_k} exceeds the {len(data)} training vectors")

    metadata = ModelMetadata(
        algorithm=Algorithm.KNN,
        params=params_to_dict(params),
        spec_version=data.spec_version,
        dimension=data.dimension,
        n_train=len(data),
        class_counts=[int(c) for c in data.class_counts()],
    )
    return KNNModel(
        metadata=metadata,
        vectors=data.vectors.copy(),
        labels=data.labels.copy(),
        neighbors_k=params.neighbors_k,
        weighted=params.inverse_distance_weighting_i,
    )
