"""Oversmoothing diagnostics and linear-probe evaluation on frozen embeddings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import clean_view
from .encoder import BlockEncoder, full_forward
from .graph import GraphDataset
from .linalg import DimensionError, make_rng
from .probe import LinearProbe

ZERO_NORM = 1e-12


def mad(z: np.ndarray, g: GraphDataset) -> float | None:
    """Mean over nodes of the average cosine distance to direct neighbours.

    Nodes without neighbours or with a (near) zero representation are left
    out, as are neighbour pairs whose other end is zero. Returns ``None``
    when no node qualifies.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != g.num_nodes:
        raise DimensionError(f"expected {g.num_nodes} rows, got shape {z.shape}")
    if g.num_edges == 0:
        return None
    norms = np.linalg.norm(z, axis=1)
    live = norms > ZERO_NORM
    unit = np.zeros_like(z)
    unit[live] = z[live] / norms[live, None]
    src = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    dst = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    ok = live[src] & live[dst]
    src, dst = src[ok], dst[ok]
    if len(src) == 0:
        return None
    cos = np.clip(np.einsum("ij,ij->i", unit[src], unit[dst]), -1.0, 1.0)
    n = g.num_nodes
    total = np.bincount(src, weights=1.0 - cos, minlength=n)
    count = np.bincount(src, minlength=n)
    has = count > 0
    return float(np.mean(total[has] / count[has]))


@dataclass
class MadProfile:
    values: list
    depth: int
    mode: str = ""
    seed: int | None = None

    @property
    def layers(self) -> list[int]:
        return list(range(1, len(self.values) + 1))

    def mean_over(self, first: int, last: int) -> float:
        """Mean MAD over layers ``first..last`` (1-based, inclusive), undefined entries skipped."""
        vals = [v for v in self.values[first - 1 : last] if v is not None]
        return float(np.mean(vals)) if vals else float("nan")


def mad_profile(enc: BlockEncoder, g: GraphDataset) -> MadProfile:
    """MAD of every layer's output on the clean (un-augmented) graph."""
    dtype = enc.layers[0].weight.dtype
    view = clean_view(g, dtype=dtype)
    _, hidden = full_forward(enc, view.adjacency, view.features, return_hidden=True)
    return MadProfile(
        values=[mad(h, g) for h in hidden],
        depth=enc.depth,
        mode=str(enc.meta.get("mode", "")),
        seed=enc.seed,
    )


def embed(enc: BlockEncoder, g: GraphDataset) -> np.ndarray:
    """Final-layer representations of the clean graph."""
    view = clean_view(g, dtype=enc.layers[0].weight.dtype)
    return full_forward(enc, view.adjacency, view.features)


@dataclass
class ProbeResult:
    accuracies: list
    params: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


def linear_probe(
    z: np.ndarray,
    g: GraphDataset,
    repeats: int = 5,
    seed: int = 0,
    lr: float = 1e-2,
    weight_decay: float = 1e-4,
    epochs: int = 300,
) -> ProbeResult:
    """Logistic-regression probe on frozen embeddings.

    Each repeat trains from a freshly seeded initialization on the train
    split, keeps the epoch with the best validation accuracy, and reports
    test accuracy at that epoch.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != g.num_nodes:
        raise DimensionError(f"expected {g.num_nodes} embedding rows, got shape {z.shape}")
    masks = {name: g.mask(name) for name in ("train", "val", "test")}
    for name, m in masks.items():
        if not m.any():
            raise ValueError(f"{name} split is empty")
    accs = []
    for r in range(repeats):
        clf = LinearProbe(lr=lr, weight_decay=weight_decay, epochs=epochs, random_state=seed + r)
        clf.fit(
            z[masks["train"]],
            g.labels[masks["train"]],
            X_val=z[masks["val"]],
            y_val=g.labels[masks["val"]],
            n_classes=g.num_classes,
        )
        accs.append(clf.score(z[masks["test"]], g.labels[masks["test"]]))
    return ProbeResult(
        accuracies=accs,
        params={"lr": lr, "weight_decay": weight_decay, "epochs": epochs, "repeats": repeats, "seed": seed},
    )


def random_rotation(dim: int, seed: int) -> np.ndarray:
    q, r = np.linalg.qr(make_rng(seed, stream=7).normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))
