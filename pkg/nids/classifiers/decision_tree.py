import logging

from nids.classifiers.dataset import Dataset
from nids.classifiers.models import DecisionTreeModel, ModelMetadata
from nids.classifiers.params import Algorithm, DTParams, params_to_dict
from nids.classifiers.tree import PessimisticPruner, flatten, grow_tree

logger = logging.getLogger(__name__)


def train_decision_tree(data: Dataset, params: DTParams = DTParams()) -> DecisionTreeModel:
    """ C4.5-style tree: gain-ratio splits, then pessimistic pruning at confidence C
    (a higher C prunes less). Deterministic for a fixed row order. """
    root = grow_tree(data.vectors, data.labels, min_leaf=params.min_instances_m)

    collapsed = 0
    if params.pruned:
        collapsed = PessimisticPruner(params.confidence_c).prune(root)

    tree = flatten(root)
    logger.debug(f"decision tree: {tree.n_nodes} nodes, {tree.leaf_count()} leaves, {collapsed} subtrees pruned")

    metadata = ModelMetadata(
        algorithm=Algorithm.DT,
        params=params_to_dict(params),
        spec_version=data.spec_version,
        dimension=data.dimension,
        n_train=len(data),
        class_counts=[int(c) for c in data.class_counts()],
        notes={'nodes': tree.n_nodes, 'leaves': tree.leaf_count(), 'pruned_subtrees': collapsed},
    )
    return DecisionTreeModel(metadata=metadata, tree=tree)
