"""scikit-learn style front end.

``BlockGCL`` is a transformer whose "X" is a :class:`GraphDataset`::

    model = BlockGCL(depth=16, block_size=1).fit(graph)
    z = model.transform(graph)             # final-layer embeddings
    model.mad_profile(graph).values        # per-layer oversmoothing
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .encoder import full_forward
from .evaluation import ProbeResult, embed, linear_probe, mad_profile
from .graph import GraphDataset
from .augment import clean_view
from .trainer import TrainConfig, fit


def check_graph(g) -> GraphDataset:
    if not isinstance(g, GraphDataset):
        raise TypeError(f"expected a GraphDataset, got {type(g).__name__}")
    if g.num_nodes < 2:
        raise ValueError("graph needs at least 2 nodes")
    return g


class BlockGCL(TransformerMixin, BaseEstimator):
    """Self-supervised GCN encoder trained blockwise (or end-to-end) with a CCA loss.

    All constructor arguments mirror :class:`blockgcl.trainer.TrainConfig`.
    Augmentation rates left as ``None`` are taken from the per-dataset preset
    keyed by ``graph.name``.
    """

    def __init__(
        self,
        depth=2,
        block_size=1,
        lam=1e-3,
        p_edge_drop=None,
        p_feat_mask=None,
        per_entry_mask=False,
        hidden_dim=512,
        learning_rate=1e-3,
        weight_decay=0.0,
        epochs=100,
        seed=0,
        mode="blockwise",
        precision="f64",
        block_output_activation="relu",
        eps_std=1e-8,
    ):
        self.depth = depth
        self.block_size = block_size
        self.lam = lam
        self.p_edge_drop = p_edge_drop
        self.p_feat_mask = p_feat_mask
        self.per_entry_mask = per_entry_mask
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.seed = seed
        self.mode = mode
        self.precision = precision
        self.block_output_activation = block_output_activation
        self.eps_std = eps_std

    def to_config(self) -> TrainConfig:
        return TrainConfig(**self.get_params())

    def fit(self, X, y=None, loss_log=None):
        g = check_graph(X)
        self.encoder_, self.record_ = fit(g, self.to_config(), loss_log=loss_log)
        self.n_features_in_ = g.num_features
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "encoder_")
        g = check_graph(X)
        if g.num_features != self.n_features_in_:
            raise ValueError(
                f"graph has {g.num_features} features, encoder was fit on {self.n_features_in_}"
            )
        return embed(self.encoder_, g)

    def transform_layers(self, X) -> list[np.ndarray]:
        """Every layer's output on the clean graph."""
        check_is_fitted(self, "encoder_")
        g = check_graph(X)
        view = clean_view(g, dtype=self.encoder_.layers[0].weight.dtype)
        return full_forward(self.encoder_, view.adjacency, view.features, return_hidden=True)[1]

    def mad_profile(self, X):
        check_is_fitted(self, "encoder_")
        return mad_profile(self.encoder_, check_graph(X))

    def probe(self, X, repeats=5, seed=0, **probe_kw) -> ProbeResult:
        """Linear-probe accuracy of the final embeddings on ``X``'s split."""
        g = check_graph(X)
        return linear_probe(self.transform(g), g, repeats=repeats, seed=seed, **probe_kw)
