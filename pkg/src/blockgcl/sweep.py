"""Depth x block-size x mode experiment grids, aggregated over seeds."""

from __future__ import annotations

import dataclasses
import functools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunOptions, SweepSpec
from .evaluation import embed, linear_probe, mad_profile
from .graph import load_dataset, resolve_dataset_path
from .report import RESULTS_COLUMNS, write_csv
from .trainer import TrainConfig, fit, preset_augmentation

logger = logging.getLogger(__name__)

RUN_COLUMNS = ["dataset", "mode", "depth", "block_size", "seed", "acc", "mad_last_layer", "final_loss"]
MAD_PROFILE_COLUMNS = ["dataset", "mode", "depth", "block_size", "seed", "layer", "mad"]


@dataclass(frozen=True)
class Cell:
    dataset: str
    mode: str
    depth: int
    block_size: int


def grid(spec: SweepSpec) -> list[Cell]:
    """Cells in output order. End-to-end cells ignore block size (recorded as the depth)."""
    cells = []
    for ds in spec.datasets:
        for mode in spec.modes:
            for depth in spec.depths:
                if mode == "end2end":
                    cells.append(Cell(ds, mode, depth, depth))
                    continue
                for bs in spec.block_sizes:
                    if bs <= depth:
                        cells.append(Cell(ds, mode, depth, bs))
    return cells


@functools.lru_cache(maxsize=8)
def _dataset(path: str, row_normalize: bool, split_seed: int):
    return load_dataset(resolve_dataset_path(path), row_normalize=row_normalize, split_seed=split_seed)


def run_single(g, cfg: TrainConfig, opts: RunOptions) -> dict:
    enc, record = fit(g, cfg)
    profile = mad_profile(enc, g)
    probe = linear_probe(
        embed(enc, g), g, repeats=opts.probe_repeats, seed=opts.probe_seed,
        lr=opts.probe_lr, weight_decay=opts.probe_weight_decay, epochs=opts.probe_epochs,
    )
    return {
        "acc": probe.mean,
        "mad": profile.values,
        "final_loss": record.epoch_losses[-1] if record.epoch_losses else None,
    }


def run_cell(cell: Cell, spec: SweepSpec) -> dict:
    seeds = [spec.base_seed + r for r in range(spec.runs)]
    out = {"cell": cell, "seeds": seeds, "runs": [], "status": "ok"}
    try:
        g = _dataset(cell.dataset, spec.options.row_normalize, spec.options.split_seed)
        for seed in seeds:
            cfg = dataclasses.replace(
                spec.base, depth=cell.depth, block_size=cell.block_size, mode=cell.mode, seed=seed
            )
            out["runs"].append(run_single(g, cfg, spec.options))
    except Exception as exc:  # a failed cell must not stop the sweep
        logger.exception("cell %s failed", cell)
        out["status"] = f"failed:{type(exc).__name__}"
    return out


def _mean_std(vals):
    vals = [v for v in vals if v is not None]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.std(vals))


def sweep_header(spec: SweepSpec) -> dict:
    base = spec.base.as_dict()
    for key in ("depth", "block_size", "mode", "seed"):
        base.pop(key)
    header = {
        "datasets": spec.datasets,
        "depths": spec.depths,
        "block_sizes": spec.block_sizes,
        "modes": spec.modes,
        "runs": spec.runs,
        "base_seed": spec.base_seed,
    }
    header.update(base)
    header.update(dataclasses.asdict(spec.options))
    for ds in spec.datasets:
        name = Path(ds).name
        pe, pf = preset_augmentation(name)
        pe = pe if spec.base.p_edge_drop is None else spec.base.p_edge_drop
        pf = pf if spec.base.p_feat_mask is None else spec.base.p_feat_mask
        header[f"augmentation[{name}]"] = [pe, pf]
    return header


def run_sweep(spec: SweepSpec, out_dir, workers: int | None = None) -> Path:
    """Run every cell, write ``results.csv``, ``runs.csv`` and ``mad_profiles.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = grid(spec)
    workers = spec.workers if workers is None else workers
    if workers and workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_cell, cells, [spec] * len(cells)))
    else:
        outcomes = [run_cell(c, spec) for c in cells]

    results, runs, mads = [], [], []
    for o in outcomes:
        c: Cell = o["cell"]
        name = Path(c.dataset).name
        ok = o["status"] == "ok"
        acc_mean, acc_std = _mean_std([r["acc"] for r in o["runs"]]) if ok else (None, None)
        mad_last, _ = _mean_std([r["mad"][-1] for r in o["runs"]]) if ok else (None, None)
        results.append([
            name, c.mode, c.depth, c.block_size, acc_mean, acc_std, mad_last,
            len(o["seeds"]), ";".join(str(s) for s in o["seeds"]), o["status"],
        ])
        for seed, r in zip(o["seeds"], o["runs"]):
            runs.append([name, c.mode, c.depth, c.block_size, seed, r["acc"], r["mad"][-1], r["final_loss"]])
            for layer, v in enumerate(r["mad"], start=1):
                mads.append([name, c.mode, c.depth, c.block_size, seed, layer, v])
    header = sweep_header(spec)
    write_csv(out_dir / "runs.csv", RUN_COLUMNS, runs, header)
    write_csv(out_dir / "mad_profiles.csv", MAD_PROFILE_COLUMNS, mads, header)
    return write_csv(out_dir / "results.csv", RESULTS_COLUMNS, results, header)
