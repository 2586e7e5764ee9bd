#!/usr/bin/env python3
"""Convert raw Planetoid files (ind.<name>.x, .tx, .allx, .y, .ty, .ally, .graph,
.test.index) into the CSV dataset layout read by ``blockgcl.graph.load_dataset``.

    python scripts/planetoid_to_csv.py RAW_DIR cora OUT_DIR/cora

No ``splits.csv`` is written, so loading draws a seeded random 1:1:8 split.
Citeseer has test indices with no features; those nodes get zero features and
label 0, which is how the common loaders treat them.
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def _load(raw: Path, name: str, part: str):
    with open(raw / f"ind.{name}.{part}", "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def convert(raw: Path, name: str, out: Path) -> tuple[int, int, int]:
    x, tx, allx = (_load(raw, name, p) for p in ("x", "tx", "allx"))
    ty, ally = _load(raw, name, "ty"), _load(raw, name, "ally")
    graph = _load(raw, name, "graph")
    test_idx = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    del x

    lo, hi = test_idx.min(), test_idx.max()
    full = hi - lo + 1
    if len(test_idx) < full:
        # pad the test block so every index in [lo, hi] has a row
        tx_ext = sp.lil_matrix((full, tx.shape[1]))
        tx_ext[np.sort(test_idx) - lo, :] = tx
        tx = tx_ext
        ty_ext = np.zeros((full, ty.shape[1]))
        ty_ext[np.sort(test_idx) - lo, :] = ty
        ty = ty_ext

    features = sp.vstack([allx, tx]).tolil()
    labels = np.vstack([ally, ty])
    order = np.sort(test_idx)
    features[test_idx, :] = features[order, :]
    labels[test_idx, :] = labels[order, :]
    features = np.asarray(features.todense(), dtype=np.float64)
    labels = labels.argmax(axis=1)
    n = features.shape[0]

    pairs = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                pairs.add((min(u, v), max(u, v)))

    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "features.csv", features, delimiter=",", fmt="%.17g")
    with open(out / "labels.csv", "w") as fh:
        fh.write("node,label\n")
        fh.writelines(f"{i},{int(c)}\n" for i, c in enumerate(labels))
    with open(out / "edges.csv", "w") as fh:
        fh.write("src,dst\n")
        fh.writelines(f"{u},{v}\n" for u, v in sorted(pairs))
    return n, len(pairs), features.shape[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw_dir", type=Path)
    ap.add_argument("name", help="dataset prefix, e.g. cora or citeseer")
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args(argv)
    n, m, f = convert(args.raw_dir, args.name.lower(), args.out_dir)
    print(f"{args.name}: {n} nodes, {m} edges, {f} features -> {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
