"""Leak-free dataset splitting: embeddings, t-SNE, DBSCAN, DBCV, cluster split."""
from .dbcv import TooFewClusters, dbcv
from .dbscan import NOISE, dbscan
from .embedding import (EMBEDDING_DIM, VISUAL_DIM, ImageEmbedding, WrongVisualLength,
                        build_embedding, standardize, standardize_columns)
from .split import SUBSETS, ClusterPartition, cluster_split
from .tsne import (DegenerateInput, PerplexityTooLarge, Reduced2D, TSNEConfig, tsne,
                   tsne_array)
from .weather import ConstantVariables, DayRecord, select_extreme_days

__all__ = [
    "ClusterPartition", "ConstantVariables", "DayRecord", "DegenerateInput", "EMBEDDING_DIM",
    "ImageEmbedding", "NOISE", "PerplexityTooLarge", "Reduced2D", "SUBSETS", "TSNEConfig",
    "TooFewClusters", "VISUAL_DIM", "WrongVisualLength", "build_embedding", "cluster_split",
    "dbcv", "dbscan", "select_extreme_days", "standardize", "standardize_columns", "tsne",
    "tsne_array",
]
