"""Graph dataset container, on-disk CSV layout, and GCN adjacency normalization.

A dataset directory holds four UTF-8 CSV files::

    edges.csv      header ``src,dst``; one row per directed edge entry
    features.csv   no header; row i holds the F feature values of node i
    labels.csv     header ``node,label``; one row per node
    splits.csv     header ``node,split`` with split in {train,val,test}; optional

Edges are stored once per undirected pair with ``u < v``. Reversed and
repeated rows in ``edges.csv`` collapse into a single undirected edge.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .linalg import make_rng

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "val", "test")
DATA_DIR_ENV = "BLOCKGCL_DATA_DIR"


class DatasetFormatError(ValueError):
    """A dataset file is missing or malformed.

    ``path`` and ``line`` (1-based, counting the header) locate the problem.
    """

    def __init__(self, message: str, path: Path | str | None = None, line: int | None = None):
        self.path = None if path is None else Path(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{Path(path).name}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def canonical_edges(edges, num_nodes: int | None = None) -> np.ndarray:
    """Sort each pair to ``(min, max)``, drop self-loops and duplicates.

    Returns an ``(E, 2)`` int64 array in lexicographic order.
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    return np.unique(e, axis=0) if len(e) else np.zeros((0, 2), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """Node features, labels, undirected edges and a train/val/test split.

    Arrays are made read-only on construction; use :func:`dataclasses.replace`
    (or :func:`make_random_split`) to derive modified copies.
    """

    features: np.ndarray
    labels: np.ndarray
    edges: np.ndarray
    split: np.ndarray
    name: str = "graph"
    row_normalized: bool = False
    _degree_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {x.shape}")
        n = x.shape[0]
        if not np.all(np.isfinite(x)):
            raise ValueError("features contain non-finite values")
        y = np.asarray(self.labels)
        if y.shape != (n,):
            raise ValueError(f"labels must have shape ({n},), got {y.shape}")
        if n and (not np.issubdtype(y.dtype, np.integer) or y.min() < 0):
            raise ValueError("labels must be non-negative integers")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if e.min() < 0 or e.max() >= n:
                raise ValueError(f"edge endpoint out of range [0, {n})")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops must not be stored explicitly")
            if len(canonical_edges(e)) != len(e):
                raise ValueError("duplicate undirected edge")
        s = np.asarray(self.split).astype("<U5")
        if s.shape != (n,):
            raise ValueError(f"split must have shape ({n},), got {s.shape}")
        bad = ~np.isin(s, SPLIT_NAMES)
        if np.any(bad):
            raise ValueError(f"unknown split tag {s[bad][0]!r}")
        if n:
            missing = np.setdiff1d(np.arange(y.max() + 1), y[s == "train"])
            if len(missing):
                raise ValueError(f"class {int(missing[0])} has no node in the train split")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))
        object.__setattr__(self, "edges", _frozen(e))
        object.__setattr__(self, "split", _frozen(s))

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.num_nodes else 0

    @property
    def num_edges(self) -> int:
        """Undirected edge count (each pair stored once)."""
        return len(self.edges)

    @property
    def num_directed_edges(self) -> int:
        """Directed entry count, the convention used by common benchmark tables."""
        return 2 * len(self.edges)

    def mask(self, which: str) -> np.ndarray:
        if which not in SPLIT_NAMES:
            raise ValueError(f"unknown split {which!r}")
        return self.split == which

    def degrees(self) -> np.ndarray:
        if "deg" not in self._degree_cache:
            self._degree_cache["deg"] = np.bincount(
                self.edges.ravel(), minlength=self.num_nodes
            )
        return self._degree_cache["deg"]

    def with_split(self, split) -> "GraphDataset":
        return replace(self, split=np.asarray(split), _degree_cache={})

    def with_edges(self, edges) -> "GraphDataset":
        return replace(self, edges=canonical_edges(edges), _degree_cache={})

    def summary(self) -> dict:
        return {
            "name": self.name,
            "nodes": self.num_nodes,
            "edges_undirected": self.num_edges,
            "edges_directed": self.num_directed_edges,
            "features": self.num_features,
            "classes": self.num_classes,
            "train": int(self.mask("train").sum()),
            "val": int(self.mask("val").sum()),
            "test": int(self.mask("test").sum()),
            "row_normalized": self.row_normalized,
        }


# ---------------------------------------------------------------- adjacency


def normalized_adjacency_from_edges(
    num_nodes: int, edges: np.ndarray, dtype=np.float64
) -> sp.csr_matrix:
    """CSR matrix of ``D^-1/2 (A + I) D^-1/2`` for canonical undirected edges.

    Entry ``(u, v)`` is ``1 / sqrt((deg(u) + 1) (deg(v) + 1))``, where ``deg``
    counts undirected neighbours. Column indices are sorted within each row.
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    deg = np.bincount(e.ravel(), minlength=num_nodes).astype(np.float64)
    self_idx = np.arange(num_nodes, dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1], self_idx])
    cols = np.concatenate([e[:, 1], e[:, 0], self_idx])
    vals = 1.0 / np.sqrt((deg[rows] + 1.0) * (deg[cols] + 1.0))
    a = sp.csr_matrix(
        (vals.astype(dtype), (rows, cols)), shape=(num_nodes, num_nodes), dtype=dtype
    )
    a.sort_indices()
    return a


def normalized_adjacency(g: GraphDataset, dtype=np.float64) -> sp.csr_matrix:
    return normalized_adjacency_from_edges(g.num_nodes, g.edges, dtype=dtype)


def dense_normalized_adjacency(num_nodes: int, edges) -> np.ndarray:
    """Dense brute-force ``D^-1/2 (A + I) D^-1/2``; reference for small graphs."""
    a = np.eye(num_nodes)
    for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        a[u, v] = a[v, u] = 1.0
    d = a.sum(axis=1)
    inv = 1.0 / np.sqrt(d)
    return inv[:, None] * a * inv[None, :]


# ---------------------------------------------------------------- splits


def _split_counts(n: int, ratios) -> tuple[int, int, int]:
    r = np.asarray(ratios, dtype=np.float64)
    if r.shape != (3,) or np.any(r < 0) or r.sum() <= 0:
        raise ValueError(f"split ratios must be three non-negative numbers, got {ratios!r}")
    r = r / r.sum()
    n_train = int(round(r[0] * n))
    n_val = min(int(round(r[1] * n)), n - n_train)
    return n_train, n_val, n - n_train - n_val


def make_random_split(
    g: GraphDataset, ratios=(0.1, 0.1, 0.8), seed: int = 0, max_attempts: int = 100
) -> GraphDataset:
    """Assign train/val/test tags by a seeded shuffle, replacing any existing split.

    If some class ends up without a training node the shuffle is redrawn with
    the next sub-seed; after ``max_attempts`` failures a ``ValueError`` is raised.
    """
    n = g.num_nodes
    n_train, n_val, _ = _split_counts(n, ratios)
    classes = np.arange(g.num_classes)
    for attempt in range(max_attempts):
        perm = make_rng(seed, stream=attempt).permutation(n)
        split = np.full(n, "test", dtype="<U5")
        split[perm[:n_train]] = "train"
        split[perm[n_train : n_train + n_val]] = "val"
        if np.all(np.isin(classes, g.labels[split == "train"])):
            return g.with_split(split)
    raise ValueError(
        f"no split with every class in train after {max_attempts} attempts "
        f"(ratios={tuple(ratios)}, seed={seed})"
    )


def _stratified_split(labels: np.ndarray, ratios, rng: np.random.Generator) -> np.ndarray:
    split = np.full(len(labels), "test", dtype="<U5")
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_train, n_val, _ = _split_counts(len(idx), ratios)
        n_train = max(n_train, 1)
        n_val = min(n_val, len(idx) - n_train)
        split[idx[:n_train]] = "train"
        split[idx[n_train : n_train + n_val]] = "val"
    return split


# ---------------------------------------------------------------- synthetic


def generate_sbm(
    blocks: int,
    nodes_per_block: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    seed: int,
    noise: float = 1.0,
    ratios=(0.1, 0.1, 0.8),
) -> GraphDataset:
    """Stochastic block model with planted block labels.

    Each unordered node pair is linked with probability ``p_in`` inside a
    block and ``p_out`` across blocks. Features are a one-hot block signal
    (column ``block % feature_dim``) plus Gaussian noise of scale ``noise``.
    The split is stratified per block so every class has a training node.
    """
    if blocks <= 0 or nodes_per_block <= 0:
        raise ValueError("generate_sbm needs at least one block and one node per block")
    if feature_dim <= 0:
        raise ValueError("feature_dim must be positive")
    for p in (p_in, p_out):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    rng = make_rng(seed, stream=0)
    n = blocks * nodes_per_block
    labels = np.repeat(np.arange(blocks), nodes_per_block)
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, p_in, p_out)
    keep = rng.random(len(iu)) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    x = rng.normal(0.0, noise, size=(n, feature_dim))
    x[np.arange(n), labels % feature_dim] += 1.0
    split = _stratified_split(labels, ratios, make_rng(seed, stream=1))
    return GraphDataset(
        features=x, labels=labels, edges=edges, split=split, name=f"sbm{blocks}x{nodes_per_block}"
    )


# ---------------------------------------------------------------- file I/O


def _read_rows(path: Path, header: tuple[str, ...] | None):
    if not path.is_file():
        raise DatasetFormatError("missing file", path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        if header is not None:
            first = next(reader, None)
            if first is None or tuple(c.strip() for c in first) != header:
                raise DatasetFormatError(
                    f"expected header {','.join(header)!r}, got {first!r}", path, 1
                )
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            yield reader.line_num, row


def _parse_int(text: str, path: Path, line: int, what: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise DatasetFormatError(f"{what} {text!r} is not an integer", path, line) from None


def _read_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    for line, row in _read_rows(path, None):
        try:
            vals = np.array([float(c) for c in row], dtype=np.float64)
        except ValueError:
            raise DatasetFormatError("malformed feature row", path, line) from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DatasetFormatError(f"expected {width} values, got {len(vals)}", path, line)
        if not np.all(np.isfinite(vals)):
            raise DatasetFormatError("non-finite feature value", path, line)
        rows.append(vals)
    if not rows:
        raise DatasetFormatError("no feature rows", path)
    return np.vstack(rows)


def _read_node_table(path: Path, header, n: int, parse_value):
    out: list = [None] * n
    for line, row in _read_rows(path, header):
        if len(row) != 2:
            raise DatasetFormatError(f"expected 2 columns, got {len(row)}", path, line)
        node = _parse_int(row[0], path, line, "node id")
        if not 0 <= node < n:
            raise DatasetFormatError(f"node id {node} out of range [0, {n})", path, line)
        if out[node] is not None:
            raise DatasetFormatError(f"node {node} listed twice", path, line)
        out[node] = parse_value(row[1], line)
    missing = [i for i, v in enumerate(out) if v is None]
    if missing:
        raise DatasetFormatError(f"node {missing[0]} has no entry", path)
    return out


def load_dataset(
    directory: str | os.PathLike,
    row_normalize: bool = False,
    split_seed: int = 0,
    name: str | None = None,
) -> GraphDataset:
    """Read a dataset directory in the CSV layout described in the module docstring.

    Without ``splits.csv`` a random 1:1:8 split is drawn with ``split_seed``.
    ``row_normalize`` rescales every feature row to unit L1 norm (all-zero
    rows are left alone).
    """
    root = Path(directory)
    if not root.is_dir():
        raise DatasetFormatError(f"dataset directory {root} does not exist")
    features = _read_features(root / "features.csv")
    n = features.shape[0]

    labels_path = root / "labels.csv"

    def parse_label(text, line):
        v = _parse_int(text, labels_path, line, "label")
        if v < 0:
            raise DatasetFormatError(f"negative label {v}", labels_path, line)
        return v

    labels = np.array(_read_node_table(labels_path, ("node", "label"), n, parse_label))

    edges_path = root / "edges.csv"
    pairs = []
    loops = 0
    for line, row in _read_rows(edges_path, ("src", "dst")):
        if len(row) != 2:
            raise DatasetFormatError(f"expected 2 columns, got {len(row)}", edges_path, line)
        u = _parse_int(row[0], edges_path, line, "node id")
        v = _parse_int(row[1], edges_path, line, "node id")
        for node in (u, v):
            if not 0 <= node < n:
                raise DatasetFormatError(
                    f"node id {node} out of range [0, {n})", edges_path, line
                )
        if u == v:
            loops += 1
            continue
        pairs.append((u, v))
    if loops:
        logger.warning("%s: ignored %d self-loop rows", edges_path, loops)
    edges = canonical_edges(pairs)

    splits_path = root / "splits.csv"
    split = None
    if splits_path.exists():

        def parse_split(text, line):
            t = text.strip()
            if t not in SPLIT_NAMES:
                raise DatasetFormatError(f"unknown split tag {t!r}", splits_path, line)
            return t

        split = np.array(_read_node_table(splits_path, ("node", "split"), n, parse_split))
        train_classes = set(labels[split == "train"].tolist())
        for c in range(int(labels.max()) + 1):
            if c not in train_classes:
                raise DatasetFormatError(f"class {c} has no node in the train split", splits_path)
    else:
        n_classes = int(labels.max()) + 1
        missing = sorted(set(range(n_classes)) - set(labels.tolist()))
        if missing:
            raise DatasetFormatError(f"class {missing[0]} has no labelled node", labels_path)

    if row_normalize:
        s = np.abs(features).sum(axis=1, keepdims=True)
        features = np.divide(features, s, out=features.copy(), where=s > 0)

    kw = dict(
        features=features,
        labels=labels,
        edges=edges,
        name=name or root.name,
        row_normalized=row_normalize,
    )
    if split is None:
        g = GraphDataset(split=np.full(n, "train"), **kw)
        return make_random_split(g, (0.1, 0.1, 0.8), seed=split_seed)
    return GraphDataset(split=split, **kw)


def save_dataset(g: GraphDataset, directory: str | os.PathLike) -> Path:
    """Write ``g`` in the CSV layout; ``load_dataset`` reads it back exactly."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with (root / "edges.csv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("src,dst\n")
        for u, v in g.edges:
            fh.write(f"{u},{v}\n")
    with (root / "features.csv").open("w", encoding="utf-8", newline="\n") as fh:
        for row in g.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with (root / "labels.csv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("node,label\n")
        for i, y in enumerate(g.labels):
            fh.write(f"{i},{y}\n")
    with (root / "splits.csv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("node,split\n")
        for i, s in enumerate(g.split):
            fh.write(f"{i},{s}\n")
    return root


def resolve_dataset_path(path: str | os.PathLike) -> Path:
    """Resolve a dataset path, falling back to ``$BLOCKGCL_DATA_DIR/<path>``."""
    p = Path(path)
    if p.is_dir() or p.is_absolute():
        return p
    root = os.environ.get(DATA_DIR_ENV)
    if root and (Path(root) / p).is_dir():
        return Path(root) / p
    return p
