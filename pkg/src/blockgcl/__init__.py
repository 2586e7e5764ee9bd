"""Blockwise contrastive training of deep GCN encoders."""

from .augment import AugmentationSpec, GraphView, drop_edges, make_views, mask_features
from .encoder import BlockEncoder, GcnLayer, full_forward, load_checkpoint, partition_blocks, save_checkpoint
from .estimator import BlockGCL
from .evaluation import MadProfile, ProbeResult, linear_probe, mad, mad_profile
from .graph import (
    GraphDataset,
    generate_sbm,
    load_dataset,
    make_random_split,
    normalized_adjacency,
    save_dataset,
)
from .objective import CCALoss, cca_loss, standardize
from .probe import LinearProbe
from .trainer import TrainConfig, fit

__version__ = "0.1.0"

__all__ = [
    "AugmentationSpec", "BlockEncoder", "BlockGCL", "CCALoss", "GcnLayer", "GraphDataset",
    "GraphView", "LinearProbe", "MadProfile", "ProbeResult", "TrainConfig", "cca_loss",
    "drop_edges", "fit", "full_forward", "generate_sbm", "linear_probe", "load_checkpoint",
    "load_dataset", "mad", "mad_profile", "make_random_split", "make_views", "mask_features",
    "normalized_adjacency", "partition_blocks", "save_checkpoint", "save_dataset", "standardize",
]
