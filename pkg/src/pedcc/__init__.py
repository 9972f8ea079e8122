"""Embedding-space clustering around evenly-distributed hypersphere centroids."""

from .geometry import InfeasibleGeometryError, PedccSet, generate_pedcc, nearest_center
from .head import AdamState, ProjectionHead, adam_step, backward, forward
from .io import CorruptFileError, EmbeddingDataset, read_embd, write_embd
from .losses import (KernelConfig, LatentBatch, LossWeights, augmentation_loss,
                     combined_loss, gaussian_kernel, knn_loss, min_cos_loss, mmd_loss)
from .metrics import LabelPair, cluster_accuracy, hungarian, nmi
from .neighbors import NeighborTable, build_neighbors, refresh_due
from .trainer import (WEIGHT_PRESETS, ClusterAssignment, TrainConfig, TrainReport,
                      assign, train)

__all__ = [
    "AdamState", "ClusterAssignment", "CorruptFileError", "EmbeddingDataset",
    "InfeasibleGeometryError", "KernelConfig", "LabelPair", "LatentBatch",
    "LossWeights", "NeighborTable", "PedccSet", "ProjectionHead", "TrainConfig",
    "TrainReport", "WEIGHT_PRESETS", "adam_step", "assign", "augmentation_loss",
    "backward", "build_neighbors", "cluster_accuracy", "combined_loss", "forward",
    "gaussian_kernel", "generate_pedcc", "hungarian", "knn_loss", "min_cos_loss",
    "mmd_loss", "nearest_center", "nmi", "read_embd", "refresh_due", "train",
    "write_embd",
]
