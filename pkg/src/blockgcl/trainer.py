"""Blockwise (gradient-isolated) and end-to-end contrastive training.

In blockwise mode each block sees the previous block's outputs as
constants and is trained only by its own contrastive loss. End-to-end mode
is the same computation with a single block spanning every layer, so the
two modes coincide exactly when there is one block.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentationSpec, GraphView, make_views
from .encoder import BlockEncoder, LayerTape, block_backward, block_forward
from .graph import GraphDataset
from .linalg import NonFiniteError, make_rng
from .objective import CCALoss, ContrastLoss

logger = logging.getLogger(__name__)

MODES = ("blockwise", "end2end")
PRECISIONS = {"f32": np.float32, "f64": np.float64}

# Edge-drop / feature-mask rates per benchmark.
AUGMENTATION_PRESETS = {
    "cora": (0.9, 0.4),
    "citeseer": (0.6, 0.5),
    "pubmed": (0.6, 0.7),
    "photo": (0.9, 0.1),
    "computers": (0.8, 0.2),
    "computer": (0.8, 0.2),
}
FALLBACK_AUGMENTATION = (0.2, 0.2)


def preset_augmentation(dataset_name: str) -> tuple[float, float]:
    key = dataset_name.lower().replace("amazon-", "").replace("amazon_", "")
    return AUGMENTATION_PRESETS.get(key, FALLBACK_AUGMENTATION)


@dataclass
class TrainConfig:
    depth: int = 2
    block_size: int = 1
    lam: float = 1e-3
    p_edge_drop: float | None = None
    p_feat_mask: float | None = None
    per_entry_mask: bool = False
    hidden_dim: int = 512
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 100
    seed: int = 0
    mode: str = "blockwise"
    precision: str = "f64"
    block_output_activation: str = "relu"
    eps_std: float = 1e-8

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def positive(name):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v!r}")

        for name in ("depth", "block_size", "hidden_dim", "learning_rate", "eps_std"):
            positive(name)
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {tuple(PRECISIONS)}, got {self.precision!r}")
        if self.block_output_activation not in ("relu", "identity"):
            raise ValueError("block_output_activation must be 'relu' or 'identity'")
        if self.mode == "blockwise" and self.block_size > self.depth:
            raise ValueError(f"block_size {self.block_size} exceeds depth {self.depth}")
        for name in ("p_edge_drop", "p_feat_mask"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    @property
    def effective_block_size(self) -> int:
        return self.block_size if self.mode == "blockwise" else self.depth

    def resolved(self, dataset_name: str = "") -> "TrainConfig":
        """Copy with augmentation rates filled from the dataset preset when unset."""
        pe, pf = preset_augmentation(dataset_name)
        return dataclasses.replace(
            self,
            p_edge_drop=pe if self.p_edge_drop is None else self.p_edge_drop,
            p_feat_mask=pf if self.p_feat_mask is None else self.p_feat_mask,
        )

    def augmentation(self, dataset_name: str = "") -> AugmentationSpec:
        r = self.resolved(dataset_name)
        return AugmentationSpec(r.p_edge_drop, r.p_feat_mask, r.per_entry_mask)

    def contrast(self) -> ContrastLoss:
        return CCALoss(lam=self.lam, eps=self.eps_std)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState, lr: float, weight_decay: float = 0.0):
    """One in-place Adam update with bias correction and decoupled weight decay.

    ``params`` and ``grads`` are matching sequences of arrays.
    """
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
    for idx, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"gradient {idx} has shape {g.shape}, parameter has {p.shape}")
        if not np.all(np.isfinite(g)):
            err = NonFiniteError(f"non-finite gradient for parameter {idx}")
            err.index = idx
            raise err
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if weight_decay:
            p -= (lr * weight_decay) * p
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


# ---------------------------------------------------------------- gradients


def end2end_view(enc: BlockEncoder) -> BlockEncoder:
    """The same layers (shared weights) seen as one block."""
    return BlockEncoder(layers=enc.layers, blocks=[list(range(enc.depth))], seed=enc.seed)


def block_losses(
    enc: BlockEncoder, view_a: GraphView, view_b: GraphView, contrast: ContrastLoss
) -> list[float]:
    """Forward-only per-block losses on fixed views."""
    ha, hb = view_a.features, view_b.features
    losses = []
    for i in range(enc.num_blocks):
        ha = block_forward(enc, i, view_a.adjacency, ha)
        hb = block_forward(enc, i, view_b.adjacency, hb)
        losses.append(contrast.value(ha, hb))
    return losses


def compute_gradients(
    enc: BlockEncoder, view_a: GraphView, view_b: GraphView, contrast: ContrastLoss
) -> tuple[list[float], list[np.ndarray]]:
    """Per-block losses and the weight gradient of every layer.

    Block ``i`` receives gradient from its own loss only; the inputs it takes
    from block ``i - 1`` are treated as constants.
    """
    grads: list[np.ndarray | None] = [None] * enc.depth
    losses = []
    ha, hb = view_a.features, view_b.features
    for i, layer_ids in enumerate(enc.blocks):
        tapes_a: list[LayerTape] = []
        tapes_b: list[LayerTape] = []
        za = block_forward(enc, i, view_a.adjacency, ha, tapes_a)
        zb = block_forward(enc, i, view_b.adjacency, hb, tapes_b)
        loss, ga, gb = contrast(za, zb)
        if not np.isfinite(loss):
            raise NonFiniteError(f"non-finite loss in block {i}")
        wa, _ = block_backward(enc, i, view_a.adjacency, ga, tapes_a)
        wb, _ = block_backward(enc, i, view_b.adjacency, gb, tapes_b)
        for pos, layer_idx in enumerate(layer_ids):
            grads[layer_idx] = wa[pos] + wb[pos]
        losses.append(loss)
        ha, hb = za, zb
    return losses, grads  # type: ignore[return-value]


def _step(enc, grads, cfg: TrainConfig, state: AdamState, epoch: int | None):
    try:
        adam_step(enc.weights(), grads, state, cfg.learning_rate, cfg.weight_decay)
    except NonFiniteError as exc:
        idx = exc.index
        block = next(b for b, ids in enumerate(enc.blocks) if idx in ids)
        raise NonFiniteError(
            f"non-finite gradient at epoch {epoch}, block {block}, layer {idx}"
        ) from exc


def train_blockwise_epoch(
    enc: BlockEncoder,
    g: GraphDataset,
    cfg: TrainConfig,
    state: AdamState,
    rng: np.random.Generator,
    epoch: int | None = None,
) -> list[float]:
    """Sample two views, train every block on its own loss, take one Adam step."""
    views = make_views(g, cfg.augmentation(g.name), rng, dtype=cfg.dtype)
    try:
        losses, grads = compute_gradients(enc, *views, cfg.contrast())
    except NonFiniteError as exc:
        raise NonFiniteError(f"epoch {epoch}: {exc}") from exc
    _step(enc, grads, cfg, state, epoch)
    return losses


def train_end2end_epoch(
    enc: BlockEncoder,
    g: GraphDataset,
    cfg: TrainConfig,
    state: AdamState,
    rng: np.random.Generator,
    epoch: int | None = None,
) -> float:
    """One loss on the top layer, backpropagated through every layer."""
    return train_blockwise_epoch(end2end_view(enc), g, cfg, state, rng, epoch)[0]


# ---------------------------------------------------------------- runs


@dataclass
class RunRecord:
    config: dict
    dataset: dict
    block_losses: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    mad: list | None = None
    probe_accuracies: list | None = None

    @property
    def epoch_losses(self) -> list[float]:
        return [float(sum(b)) for b in self.block_losses]

    @property
    def probe_mean(self) -> float | None:
        return None if not self.probe_accuracies else float(np.mean(self.probe_accuracies))

    @property
    def probe_std(self) -> float | None:
        return None if not self.probe_accuracies else float(np.std(self.probe_accuracies))


def fit(
    g: GraphDataset,
    cfg: TrainConfig,
    loss_log: str | Path | None = None,
    callback=None,
) -> tuple[BlockEncoder, RunRecord]:
    """Initialize a seeded encoder and train it for ``cfg.epochs`` epochs.

    ``callback(epoch, losses, enc)`` runs after each epoch. When ``loss_log``
    is given, rows ``epoch,block,loss,wall_ms`` are appended to it.
    """
    cfg = cfg.resolved(g.name)
    cfg.validate()
    dtype = cfg.dtype
    enc = BlockEncoder.initialize(
        g.num_features,
        cfg.hidden_dim,
        cfg.depth,
        cfg.effective_block_size,
        make_rng(cfg.seed, stream=0),
        block_output_activation=cfg.block_output_activation,
        dtype=dtype,
        seed=cfg.seed,
    )
    enc.meta = {"mode": cfg.mode, "dataset": g.name, "block_size": cfg.effective_block_size}
    aug_rng = make_rng(cfg.seed, stream=1)
    state = AdamState()
    record = RunRecord(config=cfg.as_dict(), dataset=g.summary())
    log = None
    if loss_log is not None:
        from .report import open_loss_log

        log = open_loss_log(loss_log, record.config)
    try:
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            # blockwise over the encoder's own partition; end2end encoders have one block
            losses = train_blockwise_epoch(enc, g, cfg, state, aug_rng, epoch)
            ms = (time.perf_counter() - t0) * 1000.0
            record.block_losses.append([float(x) for x in losses])
            record.wall_ms.append(ms)
            if log is not None:
                for b, loss in enumerate(losses):
                    log.write(f"{epoch},{b},{loss!r},{ms:.3f}\n")
                log.flush()
            if callback is not None:
                callback(epoch, losses, enc)
            logger.debug("epoch %d losses %s", epoch, losses)
    finally:
        if log is not None:
            log.close()
    return enc, record
