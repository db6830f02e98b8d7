from nids.classifiers.dataset import Dataset
from nids.classifiers.decision_tree import train_decision_tree
from nids.classifiers.knn import train_knn
from nids.classifiers.models import (
    DecisionTreeModel, KNNModel, ModelMetadata, NaiveBayesModel, NullModel, RandomForestModel, SVMModel,
    TrainedModel, predict, predict_batch,
)
from nids.classifiers.naive_bayes import train_naive_bayes
from nids.classifiers.params import (
    Algorithm, DTParams, Kernel, KNNParams, NBParams, NullParams, Params, RFParams, SVMParams, params_from_dict,
)
from nids.classifiers.persistence import load_model, load_model_file, save_model, save_model_file
from nids.classifiers.random_forest import train_random_forest
from nids.classifiers.svm import train_svm
from nids.classifiers.training import train, train_null
