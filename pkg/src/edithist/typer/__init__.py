from .forest import DecisionTree, ForestConfig, RandomForest
from .labels import LabeledTriple, label_from_history
from .supervised import (EPSILON, load_supervised, rank_types, save_supervised, train_forest,
                         triple_features)
from .walks import WalkEmbeddingConfig, generate_walks, walk_embeddings

__all__ = [
    "DecisionTree", "ForestConfig", "RandomForest", "LabeledTriple", "label_from_history",
    "EPSILON", "load_supervised", "rank_types", "save_supervised", "train_forest",
    "triple_features", "WalkEmbeddingConfig", "generate_walks", "walk_embeddings",
]
