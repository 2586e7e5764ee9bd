"""Stochastic graph views: undirected edge dropping and feature masking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import GraphDataset, normalized_adjacency_from_edges


@dataclass(frozen=True)
class AugmentationSpec:
    p_edge_drop: float = 0.0
    p_feat_mask: float = 0.0
    per_entry_mask: bool = False

    def __post_init__(self):
        for name in ("p_edge_drop", "p_feat_mask"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")


@dataclass(frozen=True)
class GraphView:
    adjacency: sp.csr_matrix
    features: np.ndarray
    edges: np.ndarray


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")


def drop_edges(g: GraphDataset, p: float, rng: np.random.Generator) -> np.ndarray:
    """Remove each undirected edge independently with probability ``p``.

    Both directions of a pair go together. Self-loops are not candidates;
    normalization adds them back.
    """
    _check_p(p)
    keep = rng.random(g.num_edges) >= p
    return g.edges[keep]


def mask_features(
    x: np.ndarray, p: float, rng: np.random.Generator, per_entry: bool = False
) -> np.ndarray:
    """Zero each feature column with probability ``p``.

    The column mask is shared by all nodes. ``per_entry=True`` instead draws
    an independent mask for every (node, feature) entry.
    """
    _check_p(p)
    if per_entry:
        keep = rng.random(x.shape) >= p
    else:
        keep = (rng.random(x.shape[1]) >= p)[None, :]
    return np.where(keep, x, 0.0).astype(x.dtype, copy=False)


def make_view(
    g: GraphDataset, spec: AugmentationSpec, rng: np.random.Generator, dtype=np.float64
) -> GraphView:
    edges = drop_edges(g, spec.p_edge_drop, rng)
    x = mask_features(g.features.astype(dtype), spec.p_feat_mask, rng, spec.per_entry_mask)
    adj = normalized_adjacency_from_edges(g.num_nodes, edges, dtype=dtype)
    return GraphView(adjacency=adj, features=x, edges=edges)


def make_views(
    g: GraphDataset, spec: AugmentationSpec, rng: np.random.Generator, dtype=np.float64
) -> tuple[GraphView, GraphView]:
    """Two independently sampled views; each view's normalization uses its own surviving degrees."""
    return make_view(g, spec, rng, dtype), make_view(g, spec, rng, dtype)


def clean_view(g: GraphDataset, dtype=np.float64) -> GraphView:
    return GraphView(
        adjacency=normalized_adjacency_from_edges(g.num_nodes, g.edges, dtype=dtype),
        features=g.features.astype(dtype),
        edges=g.edges,
    )
