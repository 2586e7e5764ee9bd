"""GCN layers with manual backward passes, grouped into gradient-isolated blocks.

A layer computes ``act(A_hat @ H @ W)`` with no bias. During a block's
forward pass each layer records ``A_hat @ H`` and the pre-activation on a
:class:`LayerTape`; the matching backward pass consumes and clears it.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .linalg import DimensionError, TapeError, glorot_init, matmul, spmm

ACTIVATIONS = ("relu", "identity")

CHECKPOINT_MAGIC = b"BGCLCKPT"
CHECKPOINT_VERSION = 1


@dataclass
class GcnLayer:
    weight: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.weight.ndim != 2:
            raise ValueError("weight must be 2-D")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class LayerTape:
    aggregated: np.ndarray | None = None
    pre_activation: np.ndarray | None = None

    def clear(self) -> None:
        self.aggregated = None
        self.pre_activation = None


def layer_forward(
    layer: GcnLayer, adj: sp.csr_matrix, h_in: np.ndarray, tape: LayerTape | None = None
) -> np.ndarray:
    if h_in.ndim != 2 or h_in.shape[1] != layer.in_dim:
        raise DimensionError(
            f"layer expects input with {layer.in_dim} columns, got shape {h_in.shape}"
        )
    agg = spmm(adj, h_in)
    pre = matmul(agg, layer.weight)
    if tape is not None:
        tape.aggregated = agg
        tape.pre_activation = pre
    if layer.activation == "relu":
        return np.maximum(pre, 0)
    return pre


def layer_backward(
    layer: GcnLayer,
    adj: sp.csr_matrix,
    grad_out: np.ndarray,
    tape: LayerTape,
    need_input_grad: bool = True,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Return ``(grad_weight, grad_in)`` for the recorded forward.

    With ``G = grad_out * act'(pre)``: ``grad_weight = (A_hat H)^T G`` and
    ``grad_in = A_hat (G W^T)`` (A_hat is symmetric). The tape is cleared.
    """
    if tape.aggregated is None or tape.pre_activation is None:
        raise TapeError("layer_backward called without a recorded forward")
    if grad_out.shape != tape.pre_activation.shape:
        raise DimensionError(
            f"grad_out shape {grad_out.shape} != output shape {tape.pre_activation.shape}"
        )
    if layer.activation == "relu":
        g = np.where(tape.pre_activation > 0, grad_out, 0).astype(grad_out.dtype, copy=False)
    else:
        g = grad_out
    grad_w = matmul(tape.aggregated, g, transpose_a=True)
    grad_in = spmm(adj, matmul(g, layer.weight, transpose_b=True)) if need_input_grad else None
    tape.clear()
    return grad_w, grad_in


def partition_blocks(num_layers: int, block_size: int) -> list[list[int]]:
    """Split layer indices ``0..L-1`` into contiguous blocks of about ``block_size``.

    Uses ``L // block_size`` blocks; the remainder layers are handed out one
    at a time to the earliest blocks, so sizes differ by at most one.
    """
    if num_layers < 1:
        raise ValueError(f"num_layers must be >= 1, got {num_layers}")
    if not 1 <= block_size <= num_layers:
        raise ValueError(f"block_size must be in [1, {num_layers}], got {block_size}")
    k = num_layers // block_size
    base, extra = divmod(num_layers, k)
    blocks, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        blocks.append(list(range(start, start + size)))
        start += size
    return blocks


@dataclass
class BlockEncoder:
    """Stack of GCN layers partitioned into contiguous training blocks."""

    layers: list[GcnLayer]
    blocks: list[list[int]]
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        flat = [i for b in self.blocks for i in b]
        if any(len(b) == 0 for b in self.blocks) or flat != list(range(len(self.layers))):
            raise ValueError("blocks must be non-empty, contiguous and cover all layers in order")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"layer dimensions do not chain: {a.out_dim} -> {b.in_dim}")

    @classmethod
    def initialize(
        cls,
        in_dim: int,
        hidden_dim: int,
        depth: int,
        block_size: int,
        rng: np.random.Generator,
        block_output_activation: str = "relu",
        dtype=np.float64,
        seed: int | None = None,
    ) -> "BlockEncoder":
        blocks = partition_blocks(depth, block_size)
        block_ends = {b[-1] for b in blocks}
        dims = [in_dim] + [hidden_dim] * depth
        layers = []
        for layer_idx in range(depth):
            act = block_output_activation if layer_idx in block_ends else "relu"
            w = glorot_init(dims[layer_idx], dims[layer_idx + 1], rng, dtype=dtype)
            layers.append(GcnLayer(w, act))
        return cls(layers=layers, blocks=blocks, seed=seed)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def layer_dims(self) -> list[int]:
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    def weights(self) -> list[np.ndarray]:
        return [layer.weight for layer in self.layers]

    def copy(self) -> "BlockEncoder":
        return BlockEncoder(
            layers=[GcnLayer(l.weight.copy(), l.activation) for l in self.layers],
            blocks=[list(b) for b in self.blocks],
            seed=self.seed,
            meta=dict(self.meta),
        )

    def astype(self, dtype) -> "BlockEncoder":
        enc = self.copy()
        for layer in enc.layers:
            layer.weight = layer.weight.astype(dtype)
        return enc


def block_forward(
    enc: BlockEncoder,
    i: int,
    adj: sp.csr_matrix,
    h_in: np.ndarray,
    tapes: list[LayerTape] | None = None,
) -> np.ndarray:
    """Run block ``i``. ``h_in`` is a constant: nothing upstream is recorded.

    If ``tapes`` is given it is filled with one entry per layer in the block.
    """
    h = h_in
    if tapes is not None:
        tapes.clear()
    for layer_idx in enc.blocks[i]:
        tape = None
        if tapes is not None:
            tape = LayerTape()
            tapes.append(tape)
        h = layer_forward(enc.layers[layer_idx], adj, h, tape)
    return h


def block_backward(
    enc: BlockEncoder,
    i: int,
    adj: sp.csr_matrix,
    grad_out: np.ndarray,
    tapes: list[LayerTape],
    need_input_grad: bool = False,
) -> tuple[list[np.ndarray], np.ndarray | None]:
    """Backpropagate through block ``i`` only; returns per-layer weight grads in layer order."""
    layer_ids = enc.blocks[i]
    if len(tapes) != len(layer_ids):
        raise TapeError(f"block {i} has {len(layer_ids)} layers but {len(tapes)} tape entries")
    grads: list[np.ndarray] = [None] * len(layer_ids)  # type: ignore[list-item]
    g = grad_out
    for pos in range(len(layer_ids) - 1, -1, -1):
        want_in = need_input_grad or pos > 0
        grads[pos], g = layer_backward(
            enc.layers[layer_ids[pos]], adj, g, tapes[pos], need_input_grad=want_in
        )
    tapes.clear()
    return grads, g


def full_forward(
    enc: BlockEncoder, adj: sp.csr_matrix, x: np.ndarray, return_hidden: bool = False
):
    """Inference through all layers. With ``return_hidden`` also return every layer's output."""
    if x.ndim != 2 or x.shape[1] != enc.layers[0].in_dim:
        raise DimensionError(
            f"encoder expects {enc.layers[0].in_dim} input features, got shape {x.shape}"
        )
    h = x
    hidden = []
    for layer in enc.layers:
        h = layer_forward(layer, adj, h)
        if return_hidden:
            hidden.append(h)
    return (h, hidden) if return_hidden else h


# ---------------------------------------------------------------- checkpoints
#
# Layout (all integers little-endian):
#   8 bytes   magic b"BGCLCKPT"
#   4 bytes   uint32 header length H
#   H bytes   UTF-8 JSON header
#   payload   each layer's weight as row-major float32, in layer order
#
# Header keys: version, layer_dims, activations, blocks, seed, meta.


def save_checkpoint(enc: BlockEncoder, path: str | Path) -> Path:
    header = {
        "version": CHECKPOINT_VERSION,
        "layer_dims": enc.layer_dims,
        "activations": [layer.activation for layer in enc.layers],
        "blocks": enc.blocks,
        "seed": enc.seed,
        "meta": enc.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for layer in enc.layers:
            fh.write(np.ascontiguousarray(layer.weight, dtype="<f4").tobytes())
    return path


def load_checkpoint(path: str | Path, dtype=np.float64) -> BlockEncoder:
    data = Path(path).read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a blockgcl checkpoint")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    dims = header["layer_dims"]
    offset = 12 + hlen
    layers = []
    for (d_in, d_out), act in zip(zip(dims, dims[1:]), header["activations"]):
        count = d_in * d_out
        w = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        layers.append(GcnLayer(w.reshape(d_in, d_out).astype(dtype), act))
    if offset != len(data):
        raise ValueError(f"{path}: payload size does not match header")
    return BlockEncoder(
        layers=layers, blocks=header["blocks"], seed=header["seed"], meta=header.get("meta", {})
    )
